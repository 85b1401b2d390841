"""SpikeLab: interior spikes of the one-dimensional spatial Solow model."""
__version__ = "0.1.0"
