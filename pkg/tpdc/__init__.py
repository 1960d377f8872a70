"""Two-Photon Decay Calculator (tpdc) - relativistic finite-basis rates for hydrogen-like ions."""
__version__ = "1.0"
