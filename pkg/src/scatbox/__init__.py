"""scatbox: time-frequency scattering features, augmented-target training,
and occlusion analysis for audio classification at desk scale."""

from .atloss import (
    ATConfig,
    CLASS_ORDER,
    TargetTransform,
    at_loss,
    at_loss_grad,
    cross_entropy,
    default_at_config,
    default_transforms,
    softmax,
)
from .cnn import ConvClassifier, ConvClassifierSpec, StackSpec, default_spec
from .dataset import (
    AudioFileRecord,
    DatasetSplit,
    SegmentRef,
    SegmentSpec,
    balance_strides,
    load_wav,
    segment,
    split,
    trim_silence,
)
from .errors import (
    ConfigurationError,
    InputError,
    ParameterError,
    ScatboxError,
    TrainingDiverged,
)
from .gabor import (
    ComplexTFMatrix,
    GaborParams,
    SampledSignal,
    frame_bounds,
    gabor_transform,
)
from .mel import MelFilterBank, apply_bank, build_mel_bank, hz_to_mel, mel_to_hz
from .occlusion import OcclusionConfig, frequency_importance, masked_input, occlusion_map
from .scattering import (
    FeatureTensor,
    ScatteringConfig,
    assemble,
    default_config,
    layer1,
    layer2,
    output_atom,
)
from .tensorio import read_checkpoint, read_tensor, write_checkpoint, write_tensor
from .trainer import ArrayDataset, TrainConfig, TrainResult, evaluate, train
from .windows import WindowSpec, make_window

__version__ = "0.1.0"
