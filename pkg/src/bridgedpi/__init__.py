"""Drug-protein interaction prediction with a hyper-node bridging graph network.

Submodules:

- ``chem``: SMILES parsing and folded Morgan fingerprints
- ``protein``: k-mer features, block normalisation, sequence tokenisation
- ``autodiff``: reverse-mode automatic differentiation over numpy arrays
- ``model``: the network, its parameters and featuriser
- ``train``: loss, Adam and the training loop
- ``metrics``: ROC AUC and threshold metrics
- ``data_io``: dataset files, splits and checkpoints
- ``pipeline``: split/train/evaluate in one call
- ``synthetic``: generated data with a known labelling rule
- ``cli``: the ``bridgedpi`` command
"""

from .chem import MolecularGraph, SmilesError, morgan_fingerprint, parse_smiles
from .data_io import Checkpoint, PairRecord, load_checkpoint, load_dataset, save_checkpoint
from .metrics import EvalReport, roc_auc, threshold_metrics
from .model import BridgeDPI, Featurizer, ModelConfig
from .pipeline import RunConfig, model_from_checkpoint, run_experiment
from .protein import block_normalize, kmer_features
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "BridgeDPI",
    "Checkpoint",
    "EvalReport",
    "Featurizer",
    "ModelConfig",
    "MolecularGraph",
    "PairRecord",
    "RunConfig",
    "SmilesError",
    "TrainConfig",
    "block_normalize",
    "kmer_features",
    "load_checkpoint",
    "load_dataset",
    "model_from_checkpoint",
    "morgan_fingerprint",
    "parse_smiles",
    "roc_auc",
    "run_experiment",
    "save_checkpoint",
    "threshold_metrics",
    "train",
]
