"""groomkit: frequency-domain strand codec, scalp maps, latent models,
guide densification, strand refinement and hair metrics."""

from .codec import DEFAULT, CodecConfig, ParameterError
from .groom import Groom
from .io import GroomFileError, read_groom, write_groom
from .scalp import HIGH, LOW, HeadSdf, LatentMap, ScalpSurface, StrandMap, groom_to_map, map_to_groom

__version__ = "0.1.0"

__all__ = [
    "DEFAULT", "CodecConfig", "ParameterError", "Groom", "GroomFileError", "read_groom",
    "write_groom", "HIGH", "LOW", "HeadSdf", "LatentMap", "ScalpSurface", "StrandMap",
    "groom_to_map", "map_to_groom", "__version__",
]
