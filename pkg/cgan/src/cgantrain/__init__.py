"""cgan-trainer: conditional U-Net GAN over LSCP condition/imagery rasters."""

from .models import (
    GAN_1GB_FILTERS,
    GAN_7GB_FILTERS,
    GanConfig,
    PatchDiscriminator,
    UNetGenerator,
    build_models,
    gan_1gb,
    gan_7gb,
)
from .train import HyperParams, train
from .generate import generate
from .lscp import Raster, read_lscp, write_lscp

__version__ = "0.1.0"
