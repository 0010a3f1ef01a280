"""Motion-parameter codec and warping core for keypoint-driven face animation."""
from ._kernels import BACKEND
from .bitstream import (
    DEFAULT_QUANT,
    MotionBitstream,
    QuantSpec,
    StreamHeader,
    bitrate_kbps,
    bits_per_frame,
    decode_frame,
    dequantize_uniform,
    encode_frame,
    quantize_uniform,
    read_stream,
    savings_percent,
    write_stream,
)
from .errors import (
    AnimKPError,
    BadMagic,
    DegenerateKeypoints,
    InvalidParameter,
    NearSingular,
    TruncatedStream,
    UnsupportedVersion,
)
from .gradnorm import ScalarNet, empirical_lipschitz, grad_normalize, net_eval_with_grad
from .metrics import psnr, ssim
from .transforms import (
    KeypointFrame,
    MotionParams,
    TransformMode,
    compose_jacobian,
    compose_jacobian_inverse,
    invert2x2,
    rotation_loss_l1,
    rotation_matrix,
    scale_regression,
    shear_inverse,
    shear_matrix,
)
from .warpfield import (
    animate_frame,
    bilinear_sample,
    blend_warp_fields,
    gaussian_weight_map,
    keypoint_warp_grid,
    neutral_grid,
)

__version__ = "0.1.0"
