"""Real vs AI-generated image detection via spectral + semantic feature fusion."""

__version__ = "0.1.0"
