"""Scale-translation group-equivariant 1D CNNs for localizing wave signatures in altimetry windows."""
from .contrastive import PretrainConfig, nt_xent, pretrain, transfer
from .data import AltimetryTrack, SyntheticConfig, load_csv, save_csv, synthesize, window_arrays
from .groupconv import ScaleGrid, group_conv, lift, project
from .metrics import eval_report, g_mean, mauc, mmcc
from .models import build_model

__version__ = "0.1.0"

__all__ = [
    "AltimetryTrack", "PretrainConfig", "ScaleGrid", "SyntheticConfig", "build_model", "eval_report",
    "g_mean", "group_conv", "lift", "load_csv", "mauc", "mmcc", "nt_xent", "pretrain", "project",
    "save_csv", "synthesize", "transfer", "window_arrays",
]
