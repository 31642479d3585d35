"""
Command-line surface: each subcommand end to end through main(argv), and the
one-line JSON error report on stderr.
"""
import json

import pytest

from main import main
from models.configs import SyntheticSpec
from models.schemas import HOITriplet
from tasks.annotations import load_annotations, save_predictions


def _json_tail(text: str):
    """Parse the JSON document that ends stdout (progress lines may precede it)"""
    starts = [i for i, line in enumerate(text.splitlines()) if line in ('{', '[')]
    return json.loads('\n'.join(text.splitlines()[starts[0]:]))


@pytest.fixture
def dataset(tmp_path, capsys):
    spec = tmp_path / 'spec.json'
    spec.write_text(SyntheticSpec(train_count=4, test_count=2, seed=3).model_dump_json())
    assert main(['synth', '--spec', str(spec), '--out', str(tmp_path / 'data')]) == 0
    capsys.readouterr()
    return tmp_path / 'data' / 'annotations.json'


class TestSynth:

    def test_writes_dataset(self, tmp_path, capsys):
        spec = tmp_path / 'spec.json'
        spec.write_text(SyntheticSpec(train_count=2, test_count=1, seed=5).model_dump_json())
        assert main(['synth', '--spec', str(spec), '--out', str(tmp_path / 'out')]) == 0
        summary = _json_tail(capsys.readouterr().out)
        assert (summary['train'], summary['test']) == (2, 1)
        assert load_annotations(summary['annotations']).split_sizes == (2, 1)


class TestGround:

    def test_ground_truth_sentences(self, dataset, capsys):
        assert main(['ground', '--annotations', str(dataset)]) == 0
        sentences = json.loads(capsys.readouterr().out)
        assert len(sentences) == 6
        assert {s['polarity'] for s in sentences} == {'positive'}
        assert all(s['text'].startswith('A person ') for s in sentences)

    def test_stored_predictions_are_matched(self, dataset, tmp_path, capsys):
        manifest = load_annotations(dataset)
        first = manifest.train[0]
        stray = first.gt_triplets[0].with_score(0.3)
        wrong = HOITriplet(stray.human_box, stray.object_box, (stray.object_id + 1) % 3, stray.verb_id, 0.2)
        preds = save_predictions({first.image_id: [stray, wrong]}, tmp_path / 'preds.json')
        assert main(['ground', '--annotations', str(dataset), '--predictions', str(preds), '--variant', 'verb']) == 0
        sentences = json.loads(capsys.readouterr().out)
        assert [s['polarity'] for s in sentences] == ['positive', 'negative']
        assert sentences[0]['text'] == manifest.vocabulary.verb_names[stray.verb_id]


class TestEval:

    def test_perfect_predictions(self, dataset, tmp_path, capsys):
        manifest = load_annotations(dataset)
        preds = save_predictions({a.image_id: list(a.gt_triplets) for a in manifest.all_images},
                                 tmp_path / 'preds.json')
        out = tmp_path / 'result.json'
        assert main(['eval', '--pred', str(preds), '--gt', str(dataset), '--out', str(out),
                     '--pr-csv', str(tmp_path / 'pr.csv')]) == 0
        captured = capsys.readouterr()
        assert json.loads(captured.out)['full_map'] == pytest.approx(1.0)
        assert 'Full' in captured.err
        assert json.loads(out.read_text())['full_map'] == pytest.approx(1.0)
        assert (tmp_path / 'pr.csv').exists()

    def test_missing_prediction_file(self, dataset, tmp_path, capsys):
        assert main(['eval', '--pred', str(tmp_path / 'absent.json'), '--gt', str(dataset)]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'IngestionError'
        assert error['path'].endswith('absent.json')

    def test_scenario_needs_vcoco(self, dataset, tmp_path, capsys):
        preds = save_predictions({}, tmp_path / 'preds.json')
        assert main(['eval', '--pred', str(preds), '--gt', str(dataset), '--scenario', '1']) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'ValidationError' and error['details']


class TestScore:

    def test_histogram_outputs(self, dataset, tmp_path, capsys):
        prefix = tmp_path / 'scores'
        assert main(['score', '--annotations', str(dataset), '--out', str(prefix), '--negative-cap', '2']) == 0
        paths = _json_tail(capsys.readouterr().out)
        lines = (tmp_path / 'scores.csv').read_text().strip().splitlines()
        assert len(lines) == 1 + 6 * 3
        assert paths['plot'].endswith('scores.png')


class TestParamsAndErrors:

    def test_params(self, capsys):
        assert main(['params']) == 0
        assert 'total learnable' in capsys.readouterr().out

    def test_unknown_prompt_variant(self, capsys):
        assert main(['ablate', 'prompt', '--variants', 'full', 'adverb']) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'ValueError' and 'adverb' in error['message']

    def test_bad_config_key(self, tmp_path, capsys):
        config = tmp_path / 'bad.toml'
        config.write_text('epochz = 2\n')
        assert main(['train', '--config', str(config)]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error['error'] == 'ValidationError'
        assert error['details'][0]['loc'] == ['epochz']
