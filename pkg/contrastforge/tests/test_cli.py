"""
End-to-end command line flows on a tiny phantom dataset
"""
import configparser

import pytest

from contrastforge.checkpoints import read_checkpoint
from contrastforge.cli import main
from contrastforge.config import load_config
from contrastforge.constants import CGAN_UNREG, MANIFEST_NAME, PSNR, SSIM, T1, T2, TEST_ROLE
from contrastforge.dataset import Dataset
from contrastforge.reports import read_report_csv
from contrastforge.runlog import RunLog
from contrastforge.tests.data import TINY_CONFIG
from contrastforge.volumes import read_volume, volume_filename


def phantom_args(out, *extra):
    return ['phantom', '--subjects', '3', '--size', '16', '--seed', '5', '--out', str(out)] + list(extra)


def read_run_spec(directory, command):
    spec = configparser.ConfigParser(interpolation=None)
    spec.read(directory / 'run_{0}.ini'.format(command))
    return spec[command]


def tiny_overrides(**changes):
    options = dict(TINY_CONFIG)
    options.update(changes)
    args = []
    for key, value in options.items():
        args += ['--override', '{0}={1}'.format(key, value)]
    return args


@pytest.fixture(scope='module')
def phantom_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp('cli') / 'data'
    assert main(phantom_args(out)) == 0
    return out


@pytest.fixture(scope='module')
def run_dir(phantom_dir):
    out = phantom_dir.parent / 'run'
    assert main(['train', '--dataset', str(phantom_dir), '--out', str(out)] + tiny_overrides()) == 0
    return out


class TestPhantom:

    def test_layout(self, phantom_dir):
        assert (phantom_dir / MANIFEST_NAME).is_file()
        assert len(list(phantom_dir.rglob('*.cfv'))) == 6
        spec = configparser.ConfigParser()
        spec.read(phantom_dir / 'run_phantom.ini')
        assert spec['phantom']['seed'] == '5'
        assert spec['phantom']['misalign'] == 'False'

    def test_rerun_is_identical(self, phantom_dir, tmp_path):
        assert main(phantom_args(tmp_path)) == 0
        written = sorted(p.relative_to(phantom_dir) for p in phantom_dir.rglob('*') if p.is_file())
        assert written == sorted(p.relative_to(tmp_path) for p in tmp_path.rglob('*') if p.is_file())
        for relative in written:
            assert (tmp_path / relative).read_bytes() == (phantom_dir / relative).read_bytes()
        assert 'out' not in read_run_spec(tmp_path, 'phantom')

    def test_misaligned(self, tmp_path):
        assert main(phantom_args(tmp_path, '--misalign', '--max-rot-deg', '3')) == 0
        dataset = Dataset.load(tmp_path)
        assert dataset.misaligned and dataset.misaligned_contrast == T2
        assert read_run_spec(tmp_path, 'phantom')['misalign_contrast'] == T2

    def test_invalid_options(self, tmp_path):
        assert main(phantom_args(tmp_path, '--train-fraction', '1.5')) == 2

    def test_thread_environment_not_an_integer(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv('CONTRASTFORGE_THREADS', 'four')
        assert main(phantom_args(tmp_path)) == 2
        assert 'CONTRASTFORGE_THREADS' in capsys.readouterr().err


class TestTrain:

    def test_outputs(self, run_dir):
        cfg = load_config(run_dir / 'config.ini')
        assert cfg.image_size == 16 and cfg.depth == 2 and cfg.seed == 3
        ckpt = read_checkpoint(run_dir / 'final.cfckpt')
        assert ckpt.epoch == cfg.epochs and ckpt.config == cfg
        assert len(RunLog.read(run_dir / 'runlog.csv').values('G')) == cfg.epochs * cfg.steps_per_epoch
        assert (run_dir / 'run_train.ini').is_file()

    def test_mode_needs_matching_dataset(self, phantom_dir, tmp_path):
        args = ['train', '--dataset', str(phantom_dir), '--out', str(tmp_path)] + tiny_overrides(mode=CGAN_UNREG)
        assert main(args) == 2

    def test_unknown_override(self, phantom_dir, tmp_path):
        args = ['train', '--dataset', str(phantom_dir), '--out', str(tmp_path), '--override', 'speed=3']
        assert main(args) == 2

    def test_resume_appends_runlog(self, phantom_dir, tmp_path):
        base = ['train', '--dataset', str(phantom_dir)] + tiny_overrides(checkpoint_every=1)
        assert main(base + ['--out', str(tmp_path / 'full')]) == 0
        resumed = tmp_path / 'resumed'
        assert main(base + ['--out', str(resumed), '--resume', str(tmp_path / 'full' / 'epoch_0001.cfckpt')]) == 0
        assert (resumed / 'final.cfckpt').read_bytes() == (tmp_path / 'full' / 'final.cfckpt').read_bytes()


class TestSynthEvalReport:
    """
    synth, baseline, eval and report chained the way a desk experiment runs them
    """

    def test_flow(self, phantom_dir, run_dir, tmp_path):
        synth_dir = tmp_path / 'pGAN'
        assert main(['synth', '--ckpt', str(run_dir / 'final.cfckpt'), '--dataset', str(phantom_dir),
                     '--out', str(synth_dir), '--pgm-dir', str(tmp_path / 'pgm')]) == 0
        dataset = Dataset.load(phantom_dir)
        subject = dataset.subjects(TEST_ROLE)[0]
        synthesized = read_volume(synth_dir / volume_filename(subject, T2))
        assert synthesized.dims == (16, 16, 16) and synthesized.contrast == T2
        assert len(list((tmp_path / 'pgm').glob('*.pgm'))) == 1

        copy_dir = tmp_path / 'copy'
        assert main(['baseline', '--dataset', str(phantom_dir), '--kind', 'copy', '--out', str(copy_dir)]) == 0

        ref_dir = phantom_dir / TEST_ROLE
        for method_dir in (synth_dir, copy_dir):
            assert main(['--threads', '2', 'eval', '--pred', str(method_dir), '--ref', str(ref_dir),
                         '--out', str(tmp_path / 'eval' / (method_dir.name + '.csv'))]) == 0
        rows = read_report_csv(tmp_path / 'eval' / 'pGAN.csv')
        assert [(r.task, r.method, r.metric) for r in rows] == [('T1→T2', 'pGAN', PSNR), ('T1→T2', 'pGAN', SSIM)]
        assert rows[0].n == 16

        table_path = tmp_path / 'table.txt'
        assert main(['report', '--inputs', str(tmp_path / 'eval' / 'pGAN.csv'), str(tmp_path / 'eval' / 'copy.csv'),
                     '--out', str(table_path), '--csv', str(tmp_path / 'all.csv')]) == 0
        header = table_path.read_text(encoding='utf-8').splitlines()[0].split()
        assert header == ['task', 'pGAN', 'copy', 'best']
        assert len(read_report_csv(tmp_path / 'all.csv')) == 4

    def test_single_volume(self, phantom_dir, run_dir, tmp_path):
        dataset = Dataset.load(phantom_dir)
        subject = dataset.subjects(TEST_ROLE)[0]
        source = phantom_dir / dataset.manifest.relative_path(subject, T1)
        out = tmp_path / 'one.cfv'
        assert main(['synth', '--ckpt', str(run_dir / 'final.cfckpt'), '--source', str(source),
                     '--out', str(out)]) == 0
        assert read_volume(out).contrast == T2

    def test_cubic_baseline(self, phantom_dir, tmp_path):
        assert main(['baseline', '--dataset', str(phantom_dir), '--kind', 'cubic', '--out', str(tmp_path)]) == 0
        assert len(list(tmp_path.glob('*.cfv'))) == 1

    def test_wrong_direction(self, phantom_dir, run_dir, tmp_path):
        args = ['synth', '--ckpt', str(run_dir / 'final.cfckpt'), '--dataset', str(phantom_dir),
                '--out', str(tmp_path), '--direction', 'reverse']
        assert main(args) == 2


class TestExitCodes:

    def test_missing_reference_directory(self, phantom_dir, tmp_path):
        out = tmp_path / 'eval.csv'
        args = ['eval', '--pred', str(phantom_dir / TEST_ROLE), '--ref', str(tmp_path / 'nowhere'), '--out', str(out)]
        assert main(args) == 3
        assert not out.exists()

    def test_io_error(self, run_dir, phantom_dir, tmp_path, mocker):
        mocker.patch('contrastforge.cli.read_checkpoint', side_effect=OSError('disk gone'))
        args = ['synth', '--ckpt', str(run_dir / 'final.cfckpt'), '--dataset', str(phantom_dir),
                '--out', str(tmp_path)]
        assert main(args) == 4

    def test_bad_threads(self, phantom_dir, tmp_path):
        assert main(['--threads', '0', 'baseline', '--dataset', str(phantom_dir), '--kind', 'copy',
                     '--out', str(tmp_path)]) == 2

    def test_corrupt_checkpoint(self, phantom_dir, tmp_path):
        bad = tmp_path / 'bad.cfckpt'
        bad.write_bytes(b'not a checkpoint')
        args = ['synth', '--ckpt', str(bad), '--dataset', str(phantom_dir), '--out', str(tmp_path / 'out')]
        assert main(args) == 4

    def test_missing_dataset(self, tmp_path):
        assert main(['baseline', '--dataset', str(tmp_path), '--kind', 'copy', '--out', str(tmp_path / 'o')]) == 3
