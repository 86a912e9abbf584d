"""
ContrastForge constants
"""

# Network modes
PGAN = 'pgan'
CGAN_REG = 'cgan_reg'
CGAN_UNREG = 'cgan_unreg'
MODES = (PGAN, CGAN_REG, CGAN_UNREG)
CGAN_MODES = (CGAN_REG, CGAN_UNREG)

# Synthesis directions for cGAN checkpoints
FORWARD = 'forward'
REVERSE = 'reverse'

# Network parameter set names
GENERATOR = 'G'
DISCRIMINATOR = 'D'
GENERATOR_X = 'G_x'
GENERATOR_Y = 'G_y'
DISCRIMINATOR_X = 'D_x'
DISCRIMINATOR_Y = 'D_y'

# Layer kinds and activations
CONV = 'conv'
DECONV = 'deconv'
LEAKY_RELU = 'leaky_relu'
RELU = 'relu'
TANH = 'tanh'
KERNEL_SIZE = 4
LEAKY_SLOPE = 0.2
CHANNEL_CAP = 8
INIT_STD = 0.02

# Adam defaults
BETA1 = 0.5
BETA2 = 0.999
BASE_LR = 2e-4

# Loss weights
LAMBDA_PIX = 100.0
LAMBDA_CYCLE = 10.0

# Contrasts
T1 = 'T1'
T2 = 'T2'
CONTRASTS = (T1, T2)
CONTRAST_TAGS = {T1: 1, T2: 2}
CONTRAST_NAMES = {v: k for k, v in CONTRAST_TAGS.items()}

# Alignment flags
REGISTERED = 'registered'
MISALIGNED = 'misaligned'
RESAMPLED = 'resampled'
ALIGNMENT_FLAGS = {REGISTERED: 0, MISALIGNED: 1, RESAMPLED: 2}
ALIGNMENT_NAMES = {v: k for k, v in ALIGNMENT_FLAGS.items()}

# Acquisition protocols, (TR ms, TE ms)
PROTOCOL_PRESETS = {
    'midas': {T1: (14.0, 7.7), T2: (7730.0, 80.0)},
    'ixi': {T1: (9.813, 4.603), T2: (8178.0, 100.0)},
}
DEFAULT_PROTOCOLS = 'midas'

# Per-class tissue parameter ranges: (PD, T1 ms, T2 ms), each as (low, high)
TISSUE_RANGES = (
    ((0.66, 0.74), (750.0, 850.0), (70.0, 90.0)),        # white-matter-like
    ((0.78, 0.86), (1250.0, 1450.0), (95.0, 115.0)),     # gray-matter-like
    ((0.95, 1.00), (3500.0, 4200.0), (1600.0, 2200.0)),  # fluid-like
    ((0.86, 0.94), (280.0, 360.0), (60.0, 80.0)),        # fat-like
    ((0.50, 0.60), (1000.0, 1150.0), (45.0, 60.0)),      # dense-tissue-like
)
INTRA_CLASS_VARIATION = 0.03

# Misalignment defaults
MAX_ROT_DEG = 5.0
MAX_SHIFT_VOX = 3.0

# Normalization: mean + N std of pooled voxels maps to 1
NORMALIZATION_SIGMAS = 3.0

# SSIM defaults
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0

# Artifact files
VOLUME_MAGIC = b'CFVOL\x00\x00\x01'
VOLUME_SUFFIX = '.cfv'
CHECKPOINT_MAGIC = b'CFCKPT01'
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = '.cfckpt'
MANIFEST_NAME = 'manifest.ini'
CONFIG_NAME = 'config.ini'
RUNLOG_NAME = 'runlog.csv'
FINAL_CHECKPOINT_NAME = 'final' + CHECKPOINT_SUFFIX
TRAIN_ROLE = 'train'
TEST_ROLE = 'test'
RUNLOG_HEADER = ('epoch', 'step', 'loss_name', 'value', 'lr')
REPORT_HEADER = ('task', 'method', 'metric', 'mean', 'std', 'n')
PSNR = 'PSNR'
SSIM = 'SSIM'
