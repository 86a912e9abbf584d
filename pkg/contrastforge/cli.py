"""
Command line entry point

Exit codes: 0 success, 2 usage or configuration error, 3 data error, 4 I/O error.
"""
import argparse
import configparser
import logging
import sys
from pathlib import Path

from contrastforge import __version__
from contrastforge.baselines import BASELINES, COPY, baseline_regress, copy_source
from contrastforge.checkpoints import read_checkpoint, write_checkpoint
from contrastforge.config import load_config, write_config
from contrastforge.constants import (
    CONFIG_NAME, CONTRASTS, DEFAULT_PROTOCOLS, FINAL_CHECKPOINT_NAME, FORWARD, MANIFEST_NAME, MAX_ROT_DEG,
    MAX_SHIFT_VOX, PROTOCOL_PRESETS, REVERSE, RUNLOG_NAME, T1, T2, TEST_ROLE, TRAIN_ROLE, VOLUME_SUFFIX)
from contrastforge.dataset import Dataset, DatasetManifest, generate_dataset, task_label
from contrastforge.exceptions import ContrastForgeException, DataError
from contrastforge.metrics import evaluate
from contrastforge.reports import emit_report, read_report_csv
from contrastforge.settings import get_settings_value, resolve_threads
from contrastforge.trainers import synthesize, train
from contrastforge.volumes import read_volume, volume_filename, write_pgm, write_volume

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

IO_EXIT_CODE = 4


def write_run_spec(directory, command, args):
    """
    Freezes the resolved arguments of a command next to its outputs.

    The output location itself is left out so the same command writes identical trees anywhere.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser[command] = {key: ' '.join(str(v) for v in value) if isinstance(value, list) else str(value)
                       for key, value in sorted(vars(args).items()) if key not in ('func', 'command', 'out')}
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / 'run_{0}.ini'.format(command), 'w') as f:
        parser.write(f)


def cmd_phantom(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = generate_dataset(
        out, args.subjects, args.size, args.seed, threads=args.threads, pgm=args.pgm,
        train_fraction=args.train_fraction, n_tissues=args.n_tissues, protocols=args.protocols, noise=args.noise,
        misaligned=args.misalign, misaligned_contrast=args.misalign_contrast,
        resample_contrast=args.resample_contrast, max_rot_deg=args.max_rot_deg, max_shift_vox=args.max_shift_vox)
    write_run_spec(out, 'phantom', args)
    print("{0} subjects ({1} train, {2} test), size {3}, protocols {4}, {5}".format(
        len(manifest.roles), len(manifest.subjects(TRAIN_ROLE)), len(manifest.subjects(TEST_ROLE)),
        'x'.join(str(n) for n in manifest.size), manifest.protocols,
        'misaligned' if manifest.misaligned else 'registered'))
    for contrast, (mean, std) in sorted(manifest.stats.items()):
        print("  {0}: pooled mean {1:.4f}, std {2:.4f}".format(contrast, mean, std))
    return 0


def cmd_train(args):
    overrides = list(args.override or [])
    if args.dataset:
        overrides.append('dataset={0}'.format(args.dataset))
    cfg = load_config(args.config, overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / CONFIG_NAME, cfg)
    write_run_spec(out, 'train', args)
    ckpt, runlog = train(cfg, resume=args.resume, checkpoint_dir=out)
    write_checkpoint(out / FINAL_CHECKPOINT_NAME, ckpt)
    runlog.write(out / RUNLOG_NAME, append=args.resume is not None)
    print("{0} trained for {1} epochs; final checkpoint {2}".format(cfg.mode, ckpt.epoch, out / FINAL_CHECKPOINT_NAME))
    return 0


def _export_pgm(pgm_dir, name, volume):
    pgm_dir = Path(pgm_dir)
    pgm_dir.mkdir(parents=True, exist_ok=True)
    write_pgm(pgm_dir / (Path(name).stem + '.pgm'), volume.data[volume.dims[0] // 2])


def cmd_synth(args):
    ckpt = read_checkpoint(args.ckpt)
    out = Path(args.out)
    if args.dataset:
        dataset = Dataset.load(args.dataset)
        cfg = ckpt.config
        source_contrast = cfg.source_contrast if args.direction == FORWARD else cfg.target_contrast
        out.mkdir(parents=True, exist_ok=True)
        jobs = [(dataset.volume(s, source_contrast), s) for s in dataset.subjects(TEST_ROLE)]
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        jobs = [(read_volume(args.source), None)]
    for source, subject in jobs:
        synthesized = synthesize(ckpt, source, k=args.k, direction=args.direction)
        path = out / volume_filename(subject, synthesized.contrast) if subject is not None else out
        write_volume(path, synthesized)
        if args.pgm_dir:
            _export_pgm(args.pgm_dir, path.name, synthesized)
    write_run_spec(out if args.dataset else out.parent, 'synth', args)
    print("synthesized {0} volume(s) into {1}".format(len(jobs), out))
    return 0


def _directory(path, what):
    path = Path(path)
    if not path.is_dir():
        raise DataError("{0} directory {1} does not exist".format(what, path))
    return path


def _default_task(ref_dir, target_contrast):
    source_contrast = T1 if target_contrast == T2 else T2
    manifest_path = ref_dir.parent / MANIFEST_NAME
    resample_contrast = DatasetManifest.load(manifest_path).resample_contrast if manifest_path.is_file() else None
    return task_label(source_contrast, target_contrast, resample_contrast)


def cmd_eval(args):
    pred_dir = _directory(args.pred, 'Prediction')
    ref_dir = _directory(args.ref, 'Reference')
    pred_paths = sorted(pred_dir.glob('*' + VOLUME_SUFFIX))
    if not pred_paths:
        raise DataError("No volumes in {0}".format(pred_dir))
    missing = [p.name for p in pred_paths if not (ref_dir / p.name).is_file()]
    if missing:
        raise DataError("No reference for {0} in {1}".format(', '.join(missing), ref_dir))
    predictions = [read_volume(p) for p in pred_paths]
    references = [read_volume(ref_dir / p.name) for p in pred_paths]
    task = args.task or _default_task(ref_dir, predictions[0].contrast)
    report = evaluate(predictions, references, task, args.method or pred_dir.name, mask=args.mask,
                      volume_wise=args.volume_wise, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    print(emit_report([report], csv_path=out), end='')
    write_run_spec(out.parent, 'eval', args)
    return 0


def cmd_report(args):
    rows = []
    for path in args.inputs:
        rows.extend(read_report_csv(path))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    print(emit_report(rows, csv_path=args.csv, table_path=out), end='')
    write_run_spec(out.parent, 'report', args)
    return 0


def cmd_baseline(args):
    dataset = Dataset.load(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == COPY:
        def predict(source):
            return copy_source(source, args.target_contrast)
    else:
        fitted = baseline_regress(dataset.pairs(TRAIN_ROLE, args.source_contrast, args.target_contrast))

        def predict(source):
            return fitted.apply(source, args.target_contrast)
    subjects = dataset.subjects(TEST_ROLE)
    for subject in subjects:
        write_volume(out / volume_filename(subject, args.target_contrast),
                     predict(dataset.volume(subject, args.source_contrast)))
    write_run_spec(out, 'baseline', args)
    print("{0} baseline written for {1} test subjects into {2}".format(args.kind, len(subjects), out))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog='contrastforge', description=__doc__.strip().splitlines()[0])
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--threads', type=int, default=None,
                        help='worker threads for slice-level work (default: CONTRASTFORGE_THREADS or 1)')
    parser.add_argument('--verbose', '-v', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    phantom = commands.add_parser('phantom', help='generate a phantom dataset')
    phantom.add_argument('--subjects', type=int, required=True)
    phantom.add_argument('--size', type=int, required=True, help='edge length of the cubic volumes')
    phantom.add_argument('--seed', type=int, required=True)
    phantom.add_argument('--out', required=True)
    phantom.add_argument('--misalign', action='store_true', help='store training target volumes rigidly misaligned')
    phantom.add_argument('--misalign-contrast', choices=CONTRASTS, default=T2,
                         help='the target contrast that --misalign moves (default: T2)')
    phantom.add_argument('--noise', type=float, default=0.0, help='noise amplitude relative to the mean signal')
    phantom.add_argument('--protocols', choices=sorted(PROTOCOL_PRESETS), default=DEFAULT_PROTOCOLS)
    phantom.add_argument('--resample-contrast', choices=CONTRASTS, default=None,
                         help='pass this contrast through a registration resampling')
    phantom.add_argument('--n-tissues', type=int, default=5)
    phantom.add_argument('--train-fraction', type=float, default=0.8)
    phantom.add_argument('--max-rot-deg', type=float, default=MAX_ROT_DEG)
    phantom.add_argument('--max-shift-vox', type=float, default=MAX_SHIFT_VOX)
    phantom.add_argument('--pgm', action='store_true', help='export central slices as 16-bit PGM')
    phantom.set_defaults(func=cmd_phantom)

    train_cmd = commands.add_parser('train', help='train a pgan, cgan_reg or cgan_unreg model')
    train_cmd.add_argument('--config', default=None)
    train_cmd.add_argument('--override', action='append', metavar='KEY=VALUE')
    train_cmd.add_argument('--dataset', default=None)
    train_cmd.add_argument('--out', required=True)
    train_cmd.add_argument('--resume', default=None, metavar='CKPT')
    train_cmd.set_defaults(func=cmd_train)

    synth = commands.add_parser('synth', help='synthesize target-contrast volumes')
    synth.add_argument('--ckpt', required=True)
    source = synth.add_mutually_exclusive_group(required=True)
    source.add_argument('--source', help='one source volume; --out names the output volume')
    source.add_argument('--dataset', help='every test subject; --out names the output directory')
    synth.add_argument('--out', required=True)
    synth.add_argument('--k', type=int, default=None)
    synth.add_argument('--direction', choices=(FORWARD, REVERSE), default=FORWARD)
    synth.add_argument('--pgm-dir', default=None)
    synth.set_defaults(func=cmd_synth)

    eval_cmd = commands.add_parser('eval', help='PSNR/SSIM of predictions against references')
    eval_cmd.add_argument('--pred', required=True)
    eval_cmd.add_argument('--ref', required=True)
    eval_cmd.add_argument('--out', required=True)
    eval_cmd.add_argument('--task', default=None)
    eval_cmd.add_argument('--method', default=None)
    eval_cmd.add_argument('--mask', action='store_true', help='restrict PSNR to the reference support')
    eval_cmd.add_argument('--volume-wise', action='store_true')
    eval_cmd.set_defaults(func=cmd_eval)

    report = commands.add_parser('report', help='tabulate metric CSVs by task and method')
    report.add_argument('--inputs', nargs='+', required=True)
    report.add_argument('--out', required=True)
    report.add_argument('--csv', default=None, help='also write the merged CSV')
    report.set_defaults(func=cmd_report)

    baseline = commands.add_parser('baseline', help='write copy-source or cubic-regression predictions')
    baseline.add_argument('--dataset', required=True)
    baseline.add_argument('--kind', choices=BASELINES, required=True)
    baseline.add_argument('--out', required=True)
    baseline.add_argument('--source-contrast', choices=CONTRASTS, default=T1)
    baseline.add_argument('--target-contrast', choices=CONTRASTS, default=T2)
    baseline.set_defaults(func=cmd_baseline)
    return parser


def configure_logging(verbose):
    level = logging.DEBUG if verbose else get_settings_value('log_level')
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s %(message)s', stream=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except ContrastForgeException as e:
        log.debug("command failed", exc_info=True)
        print("contrastforge: error: {0}".format(e.msg), file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print("contrastforge: error: {0}".format(e), file=sys.stderr)
        return 2
    except OSError as e:
        print("contrastforge: error: {0}".format(e), file=sys.stderr)
        return IO_EXIT_CODE
