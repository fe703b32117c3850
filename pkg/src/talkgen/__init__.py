"""talkgen: desk-scale diffusion transformer for audio-driven,
style-controllable portrait animation on a fully synthetic benchmark."""

__version__ = "0.1.0"

from .config import EMOTIONS, GENDERS, LossWeights, TrainConfig

__all__ = ["EMOTIONS", "GENDERS", "LossWeights", "TrainConfig", "__version__"]
