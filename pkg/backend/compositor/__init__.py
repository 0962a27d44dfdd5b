"""
Diffusion-free reference drawer.
"""
from backend.compositor.blend import FILLERS, BlendRegions, composite, regions
from backend.compositor.fill import inpaint_mean, noise_fill, telea_fill

__all__ = ["FILLERS", "BlendRegions", "composite", "inpaint_mean", "noise_fill", "regions", "telea_fill"]
