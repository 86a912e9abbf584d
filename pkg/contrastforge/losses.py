"""
Adversarial, pixel-wise and cycle-consistency losses in minimization form.

pGAN pairs the cross-entropy adversarial loss with an L1 term; cGAN pairs the
least-squares adversarial loss with the cycle-consistency term.
"""
from dataclasses import dataclass

from contrastforge.constants import LAMBDA_CYCLE, LAMBDA_PIX
from contrastforge.exceptions import ConfigurationError, UsageError
from contrastforge.tensor import abs, add, as_tensor, bce_with_logits, mean, mul, square, sub


@dataclass(frozen=True)
class LossWeights:
    lambda_pix: float = LAMBDA_PIX
    lambda_cycle: float = LAMBDA_CYCLE

    def __post_init__(self):
        if self.lambda_pix < 0 or self.lambda_cycle < 0:
            raise ConfigurationError("loss weights must be non-negative, got {0} and {1}".format(
                self.lambda_pix, self.lambda_cycle))


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise UsageError("{0} needs equal shapes, got {1} and {2}".format(what, a.shape, b.shape))


def adv_loss_log_D(d_real_logits, d_fake_logits):
    d_real_logits, d_fake_logits = as_tensor(d_real_logits), as_tensor(d_fake_logits)
    _same_shape(d_real_logits, d_fake_logits, 'adv_loss_log_D')
    return add(mean(bce_with_logits(d_real_logits, 1.0)), mean(bce_with_logits(d_fake_logits, 0.0)))


def adv_loss_log_G(d_fake_logits):
    """
    Non-saturating generator term, -log D(x, G(x))
    """
    return mean(bce_with_logits(as_tensor(d_fake_logits), 1.0))


def l1_loss(y, y_hat):
    y, y_hat = as_tensor(y), as_tensor(y_hat)
    _same_shape(y, y_hat, 'l1_loss')
    return mean(abs(sub(y, y_hat)))


def pgan_total_G(adv_G, l1, weights):
    return add(adv_G, mul(l1, weights.lambda_pix))


def cycle_loss(x, x_cycled, y, y_cycled):
    """
    mean|x - G_x(G_y(x))| + mean|y - G_y(G_x(y))|
    """
    return add(l1_loss(x, x_cycled), l1_loss(y, y_cycled))


def adv_loss_lsq_D(d_real, d_fake):
    d_real, d_fake = as_tensor(d_real), as_tensor(d_fake)
    _same_shape(d_real, d_fake, 'adv_loss_lsq_D')
    return add(mean(square(sub(d_real, 1.0))), mean(square(d_fake)))


def adv_loss_lsq_G(d_fake):
    return mean(square(sub(as_tensor(d_fake), 1.0)))


def cgan_total(adv_x, adv_y, cyc, weights):
    return add(add(adv_x, adv_y), mul(cyc, weights.lambda_cycle))
