"""Raster I/O, tiling, resampling, augmentation and synthetic scenes."""

from .augment import AugmentationSpec, augment, augment_array
from .raster import RasterImage, decode_ppm, encode_ppm, load_image, save_image, to_tensor
from .resize import resize, resize_array
from .synth import fire_pixel_mask, generate_dataset, generate_scene
from .tiles import SegmentGrid, TileSegmenter, reassemble, segment, segment_array, tile_bounds

__all__ = [
    "AugmentationSpec", "RasterImage", "SegmentGrid", "TileSegmenter", "augment", "augment_array",
    "decode_ppm", "encode_ppm", "fire_pixel_mask", "generate_dataset", "generate_scene",
    "load_image", "reassemble", "resize", "resize_array", "save_image", "segment",
    "segment_array", "tile_bounds", "to_tensor",
]
