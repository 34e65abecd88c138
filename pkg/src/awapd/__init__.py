"""awapd: Amplitude-Width-Area pattern toolkit for PD source classification."""

__version__ = "0.1.0"

from .awa import AwaImage, PulseFeatures, RenderConfig, auto_ranges, extract_features, render_awa
from .dataset import AugmentSpec, DatasetManifest, augment, build_dataset, split, verify_integrity
from .errors import AwaPdError, InvalidArgument, MalformedInput, ModelFormatError, PipelineError
from .evaluation import EvalReport, evaluate, render_confusion_png
from .image_features import FEATURE_NAMES, FeatureVector, extract, segment_foreground
from .pulse_detection import (
    DetectionConfig,
    Peak,
    detect_pulses,
    find_local_maxima,
    prominence,
    width_at_half_prominence,
)
from .signal_model import CLASSES, CLASS_NAMES, PdClass, Waveform, read_waveform_csv, write_waveform_csv
from .simulator import (
    ClassPulseModel,
    ExcitationConfig,
    SimulatorConfig,
    default_config,
    desk_config,
    ground_truth,
    recovery_config,
    simulate,
)
