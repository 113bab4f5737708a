from .data import PairedBatch, PairingError, augment_triple, build_paired_batches, pair_frames
from .model import Backbone, SegModel, SmallConvEncoder, build_backbone, register_backbone
from .predict import default_min_area, extract_instances, load_seg_model, predict_dataset, predict_mask
from .train import SegTrainConfig, seg_loss, train_segmentation

__all__ = [
    "PairedBatch", "PairingError", "augment_triple", "build_paired_batches", "pair_frames", "Backbone",
    "SegModel", "SmallConvEncoder", "build_backbone", "register_backbone", "default_min_area",
    "extract_instances", "load_seg_model", "predict_dataset", "predict_mask", "SegTrainConfig", "seg_loss",
    "train_segmentation",
]
