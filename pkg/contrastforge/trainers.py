"""
pGAN and cGAN training loops and synthesis with trained generators
"""
import logging
from pathlib import Path

import numpy as np

from contrastforge.checkpoints import Checkpoint, read_checkpoint, write_checkpoint
from contrastforge.config import config_hash
from contrastforge.constants import (
    CGAN_MODES, CGAN_REG, CGAN_UNREG, CHECKPOINT_SUFFIX, DISCRIMINATOR, DISCRIMINATOR_X, DISCRIMINATOR_Y, FORWARD,
    GENERATOR, GENERATOR_X, GENERATOR_Y, PGAN, REVERSE, TRAIN_ROLE)
from contrastforge.dataset import Dataset, source_stacks
from contrastforge.exceptions import ConfigurationError, UsageError
from contrastforge.losses import (
    adv_loss_log_D, adv_loss_log_G, adv_loss_lsq_D, adv_loss_lsq_G, cgan_total, cycle_loss, l1_loss, pgan_total_G)
from contrastforge.networks import (
    build_params, build_patch_discriminator, build_unet_generator, discriminator_forward, from_network_range,
    generator_forward, to_network_range)
from contrastforge.optim import AdamState, adam_step, lr_at_epoch
from contrastforge.runlog import RunLog
from contrastforge.tensor import Tape, Tensor, add, backward, concat
from contrastforge.utils import crop_to
from contrastforge.volumes import Volume

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

SYNTH_BATCH = 8
# seed-sequence key of the shuffle generator; network initializers use 0..3
SHUFFLE_STREAM = 100


def build_networks(cfg):
    """
    Network definitions keyed by parameter-set name. In cGAN mode G_y maps
    source to target and G_x maps target back to source.
    """
    if cfg.mode == PGAN:
        return {
            GENERATOR: build_unet_generator(cfg.image_size, cfg.k, 1, cfg.base_channels, cfg.depth),
            DISCRIMINATOR: build_patch_discriminator(cfg.k, 1, cfg.disc_base_channels, cfg.disc_layers),
        }
    generator = build_unet_generator(cfg.image_size, cfg.k, cfg.k, cfg.base_channels, cfg.depth)
    discriminator = build_patch_discriminator(0, cfg.k, cfg.disc_base_channels, cfg.disc_layers)
    return {GENERATOR_X: generator, GENERATOR_Y: generator, DISCRIMINATOR_X: discriminator,
            DISCRIMINATOR_Y: discriminator}


def pgan_generator_losses(nets, params, x, y, weights, fake=None):
    """
    Returns (total, adversarial, l1) for the pGAN generator; the discriminator
    parameters in ``params`` are used as given
    """
    if fake is None:
        fake = generator_forward(nets[GENERATOR], params[GENERATOR], x)
    adv = adv_loss_log_G(discriminator_forward(nets[DISCRIMINATOR], params[DISCRIMINATOR], concat([x, fake], 1)))
    l1 = l1_loss(y, fake)
    return pgan_total_G(adv, l1, weights), adv, l1


def cgan_generator_losses(nets, params, x, y, weights, fake_y=None, fake_x=None):
    """
    Returns (total, adv_x, adv_y, cycle) for the two cGAN generators
    """
    if fake_y is None:
        fake_y = generator_forward(nets[GENERATOR_Y], params[GENERATOR_Y], x)
    if fake_x is None:
        fake_x = generator_forward(nets[GENERATOR_X], params[GENERATOR_X], y)
    adv_y = adv_loss_lsq_G(discriminator_forward(nets[DISCRIMINATOR_Y], params[DISCRIMINATOR_Y], fake_y))
    adv_x = adv_loss_lsq_G(discriminator_forward(nets[DISCRIMINATOR_X], params[DISCRIMINATOR_X], fake_x))
    cyc = cycle_loss(x, generator_forward(nets[GENERATOR_X], params[GENERATOR_X], fake_y),
                     y, generator_forward(nets[GENERATOR_Y], params[GENERATOR_Y], fake_x))
    return cgan_total(adv_x, adv_y, cyc, weights), adv_x, adv_y, cyc


def check_dataset(cfg, dataset):
    if cfg.mode in (PGAN, CGAN_REG) and dataset.misaligned:
        raise ConfigurationError("{0} mode needs a registered dataset, but {1} is misaligned".format(
            cfg.mode, dataset.root))
    if cfg.mode == CGAN_UNREG and not dataset.misaligned:
        raise ConfigurationError("{0} mode needs a misaligned dataset, but {1} is registered".format(
            cfg.mode, dataset.root))
    if cfg.mode == CGAN_UNREG and cfg.target_contrast != dataset.misaligned_contrast:
        raise ConfigurationError("{0} mode needs misaligned {1} volumes, but {2} misaligns {3}".format(
            cfg.mode, cfg.target_contrast, dataset.root, dataset.misaligned_contrast))


class TrainingRun(object):
    """
    Owns the parameters, Adam states and shuffle generator of one run.

    Each step updates the discriminators first, on generator outputs detached
    from the generator tape, then the generators against the freshly updated
    (frozen) discriminators.
    """

    def __init__(self, cfg, dataset=None):
        self.cfg = cfg
        self.dataset = dataset if dataset is not None else Dataset.load(cfg.dataset)
        check_dataset(cfg, self.dataset)
        self.nets = build_networks(cfg)
        self.params = {name: build_params(net, [cfg.seed, index])
                       for index, (name, net) in enumerate(self.nets.items())}
        self.adam = {name: AdamState.for_params(p) for name, p in self.params.items()}
        self.rng = np.random.default_rng([cfg.seed, SHUFFLE_STREAM])
        self.epoch = 0
        self.samples = self.dataset.samples(
            TRAIN_ROLE, cfg.source_contrast, cfg.target_contrast, cfg.k, cfg.mode, cfg.image_size)
        if not self.samples:
            raise ConfigurationError("The dataset has no training samples")

    def restore(self, ckpt):
        if config_hash(ckpt.config) != config_hash(self.cfg):
            raise ConfigurationError("Checkpoint was written by a different config")
        if set(ckpt.params) != set(self.params) or set(ckpt.adam) != set(self.adam):
            raise ConfigurationError("Checkpoint networks {0} do not match {1}".format(
                sorted(ckpt.params), sorted(self.params)))
        self.params = dict(ckpt.params)
        self.adam = dict(ckpt.adam)
        self.rng.bit_generator.state = ckpt.rng_state
        self.epoch = ckpt.epoch
        log.info("resuming %s run at epoch %s", self.cfg.mode, self.epoch)

    def checkpoint(self):
        return Checkpoint(epoch=self.epoch, config=self.cfg, params=dict(self.params), adam=dict(self.adam),
                          rng_state=self.rng.bit_generator.state)

    def _update(self, names, lr):
        for name in names:
            params = self.params[name]
            self.params[name], self.adam[name] = adam_step(
                params, params.grads(), self.adam[name], lr, self.cfg.beta1, self.cfg.beta2)

    def _zero_grad(self, names):
        for name in names:
            self.params[name].zero_grad()

    def _frozen(self, names):
        return {name: self.params[name].frozen() if name in names else self.params[name] for name in self.params}

    @staticmethod
    def _batch(stack):
        return Tensor(to_network_range(stack)[None])

    def pgan_discriminator_update(self, x, y, fake, lr):
        with Tape() as tape:
            d_real = discriminator_forward(self.nets[DISCRIMINATOR], self.params[DISCRIMINATOR], concat([x, y], 1))
            d_fake = discriminator_forward(self.nets[DISCRIMINATOR], self.params[DISCRIMINATOR],
                                           concat([x, fake.detach()], 1))
            loss = adv_loss_log_D(d_real, d_fake)
        self._zero_grad([DISCRIMINATOR])
        backward(tape, loss)
        self._update([DISCRIMINATOR], lr)
        return loss.item()

    def pgan_generator_update(self, g_tape, x, y, fake, lr):
        params = self._frozen([DISCRIMINATOR])
        with g_tape:
            total, adv, l1 = pgan_generator_losses(self.nets, params, x, y, self.cfg.weights, fake=fake)
        self._zero_grad([GENERATOR])
        backward(g_tape, total)
        self._update([GENERATOR], lr)
        return total.item(), adv.item(), l1.item()

    def pgan_step(self, sample, lr):
        x, y = self._batch(sample.source), self._batch(sample.target)
        g_tape = Tape()
        with g_tape:
            fake = generator_forward(self.nets[GENERATOR], self.params[GENERATOR], x)
        loss_d = self.pgan_discriminator_update(x, y, fake, lr)
        total, adv, l1 = self.pgan_generator_update(g_tape, x, y, fake, lr)
        return (('D', loss_d), ('G', total), ('G_adv', adv), ('G_l1', l1))

    def cgan_discriminator_update(self, x, y, fake_x, fake_y, lr):
        with Tape() as tape:
            loss_dy = adv_loss_lsq_D(
                discriminator_forward(self.nets[DISCRIMINATOR_Y], self.params[DISCRIMINATOR_Y], y),
                discriminator_forward(self.nets[DISCRIMINATOR_Y], self.params[DISCRIMINATOR_Y], fake_y.detach()))
            loss_dx = adv_loss_lsq_D(
                discriminator_forward(self.nets[DISCRIMINATOR_X], self.params[DISCRIMINATOR_X], x),
                discriminator_forward(self.nets[DISCRIMINATOR_X], self.params[DISCRIMINATOR_X], fake_x.detach()))
            loss = add(loss_dx, loss_dy)
        self._zero_grad([DISCRIMINATOR_X, DISCRIMINATOR_Y])
        backward(tape, loss)
        self._update([DISCRIMINATOR_X, DISCRIMINATOR_Y], lr)
        return loss_dx.item(), loss_dy.item()

    def cgan_generator_update(self, g_tape, x, y, fake_x, fake_y, lr):
        params = self._frozen([DISCRIMINATOR_X, DISCRIMINATOR_Y])
        with g_tape:
            total, adv_x, adv_y, cyc = cgan_generator_losses(
                self.nets, params, x, y, self.cfg.weights, fake_y=fake_y, fake_x=fake_x)
        self._zero_grad([GENERATOR_X, GENERATOR_Y])
        backward(g_tape, total)
        self._update([GENERATOR_X, GENERATOR_Y], lr)
        return total.item(), adv_x.item(), adv_y.item(), cyc.item()

    def cgan_step(self, sample, lr):
        target = sample.target
        if self.cfg.unpaired:
            target = self.samples[int(self.rng.integers(len(self.samples)))].target
        x, y = self._batch(sample.source), self._batch(target)
        g_tape = Tape()
        with g_tape:
            fake_y = generator_forward(self.nets[GENERATOR_Y], self.params[GENERATOR_Y], x)
            fake_x = generator_forward(self.nets[GENERATOR_X], self.params[GENERATOR_X], y)
        loss_dx, loss_dy = self.cgan_discriminator_update(x, y, fake_x, fake_y, lr)
        total, adv_x, adv_y, cyc = self.cgan_generator_update(g_tape, x, y, fake_x, fake_y, lr)
        return (('D_x', loss_dx), ('D_y', loss_dy), ('G', total), ('G_adv_x', adv_x), ('G_adv_y', adv_y),
                ('G_cycle', cyc))

    def run(self, checkpoint_dir=None):
        cfg = self.cfg
        step_fn = self.pgan_step if cfg.mode == PGAN else self.cgan_step
        runlog = RunLog()
        while self.epoch < cfg.epochs:
            lr = lr_at_epoch(self.epoch, cfg.schedule)
            order = self.rng.permutation(len(self.samples))
            if cfg.steps_per_epoch:
                order = order[:cfg.steps_per_epoch]
            for step, index in enumerate(order):
                for name, value in step_fn(self.samples[index], lr):
                    runlog.append(self.epoch, step, name, value, lr)
                    log.debug("epoch %s step %s %s=%s", self.epoch, step, name, value)
            log.info("%s epoch %s/%s done at lr %s: G loss %s", cfg.mode, self.epoch + 1, cfg.epochs, lr,
                     runlog.values('G')[-1])
            self.epoch += 1
            if checkpoint_dir is not None and cfg.checkpoint_every and self.epoch % cfg.checkpoint_every == 0:
                write_checkpoint(Path(checkpoint_dir) / 'epoch_{0:04d}{1}'.format(self.epoch, CHECKPOINT_SUFFIX),
                                 self.checkpoint())
        return self.checkpoint(), runlog


def _prepare(cfg, dataset, resume):
    run = TrainingRun(cfg, dataset)
    if resume is not None:
        run.restore(resume if isinstance(resume, Checkpoint) else read_checkpoint(resume))
    return run


def train_pgan(cfg, dataset=None, resume=None, checkpoint_dir=None):
    """
    Trains one generator and one conditional discriminator on registered pairs.

    :return: (Checkpoint, RunLog); the run log only covers epochs trained by this call
    """
    if cfg.mode != PGAN:
        raise ConfigurationError("train_pgan needs mode {0}, got {1}".format(PGAN, cfg.mode))
    return _prepare(cfg, dataset, resume).run(checkpoint_dir)


def train_cgan(cfg, dataset=None, resume=None, checkpoint_dir=None):
    """
    Trains two generators and two unconditional discriminators with the cycle-consistency loss
    """
    if cfg.mode not in CGAN_MODES:
        raise ConfigurationError("train_cgan needs one of {0}, got {1}".format(', '.join(CGAN_MODES), cfg.mode))
    return _prepare(cfg, dataset, resume).run(checkpoint_dir)


def train(cfg, dataset=None, resume=None, checkpoint_dir=None):
    trainer = train_pgan if cfg.mode == PGAN else train_cgan
    return trainer(cfg, dataset=dataset, resume=resume, checkpoint_dir=checkpoint_dir)


def synthesize(ckpt, source, k=None, direction=FORWARD):
    """
    Runs the trained generator over every axial window of ``source`` and
    reassembles the center output slices into a volume scaled to maximum 1.
    """
    cfg = ckpt.config
    k = cfg.k if k is None else k
    if k != cfg.k:
        raise UsageError("Checkpoint was trained with k={0}, got k={1}".format(cfg.k, k))
    if direction not in (FORWARD, REVERSE):
        raise UsageError("Unknown direction {0}".format(direction))
    if cfg.mode == PGAN:
        if direction != FORWARD:
            raise UsageError("pGAN checkpoints only synthesize {0}".format(FORWARD))
        net_name = GENERATOR
    else:
        net_name = GENERATOR_Y if direction == FORWARD else GENERATOR_X
    expected, produced = ((cfg.source_contrast, cfg.target_contrast) if direction == FORWARD
                          else (cfg.target_contrast, cfg.source_contrast))
    if source.contrast != expected:
        raise UsageError("Checkpoint synthesizes from {0}, got a {1} volume".format(expected, source.contrast))
    depth, height, width = source.dims
    if height > cfg.image_size or width > cfg.image_size:
        raise UsageError("Source slices {0}x{1} exceed the trained image size {2}".format(
            height, width, cfg.image_size))

    net = build_networks(cfg)[net_name]
    params = ckpt.params[net_name].frozen()
    stacks = to_network_range(source_stacks(source, k, cfg.image_size))
    outputs = []
    for start in range(0, depth, SYNTH_BATCH):
        out = generator_forward(net, params, Tensor(stacks[start:start + SYNTH_BATCH])).data
        outputs.append(out[:, out.shape[1] // 2])
    data = crop_to(from_network_range(np.concatenate(outputs)), height, width)
    peak = data.max()
    if peak > 0:
        data = data / peak
    log.debug("synthesized %s volume %s from %s", produced, data.shape, source.contrast)
    return Volume(data, produced, subject=source.subject)
