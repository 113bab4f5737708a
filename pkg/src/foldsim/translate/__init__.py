from .apply import ResolutionMismatch, translate_dataset, translate_image
from .buffer import ImagePool
from .losses import (
    COMPONENTS, LossWeights, baseline_generator_losses, cyclegan_losses, depth_log_loss,
    depth_log_loss_grad, depth_log_loss_torch, discriminator_losses, generator_losses,
)
from .networks import Generator, NetConfig, PatchDiscriminator
from .oracle import DepthOracle, LuminanceDepthOracle, make_oracle
from .train import (
    DivergenceError, TranslateConfig, TranslationModel, load_domain, load_generator, train_translation,
)

__all__ = [
    "ResolutionMismatch", "translate_dataset", "translate_image", "ImagePool", "COMPONENTS", "LossWeights",
    "baseline_generator_losses", "cyclegan_losses", "depth_log_loss", "depth_log_loss_grad",
    "depth_log_loss_torch", "discriminator_losses", "generator_losses", "Generator", "NetConfig",
    "PatchDiscriminator", "DepthOracle", "LuminanceDepthOracle", "make_oracle", "DivergenceError",
    "TranslateConfig", "TranslationModel", "load_domain", "load_generator", "train_translation",
]
