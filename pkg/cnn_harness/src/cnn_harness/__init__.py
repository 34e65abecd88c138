"""Transfer-learning harness for AWA pattern classification."""

__version__ = "0.1.0"

from .data import CLASSES, AwaImageFolder, DatasetLayoutError, InputError
from .train import ARCH_INPUT_SIZE, TrainSpec, build_model, evaluate_cnn, finetune, write_report
