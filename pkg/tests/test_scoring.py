"""
ITM scorers: the ground-truth-driven mock and the remote client with its score cache.
The remote service is replaced by an in-process fake session.
"""
import pytest
import requests
from tenacity import wait_none

from models.configs import MockScorerConfig
from models.errors import MalformedResponseError, ScorerStatusError, ScorerTimeoutError, UnknownImageError
from models.schemas import BBox, HOITriplet, ImageAnnotation
from models.vocabulary import Vocabulary
from services.scoring import MockScorer, RemoteScorer, build_scorer, mock_oracle_score, remote_score
from utils.itm_client import ITMClient
from utils.ssh_tunnel import forwarder_kwargs

BIKES = Vocabulary.synthetic(objects=('bike', 'ball'), verbs=('ride', 'eat', 'hold'), rare=())
BOX = BBox(0.5, 0.5, 0.4, 0.4)
RIDER = ImageAnnotation('img_0', 'memory://img_0', (HOITriplet(BOX, BOX, 0, 0),), 64, 64)

MOCK_CASES = [
    {"id": "gt_sentence", "sentence": "A person ride a bike", "expected": 2.0},
    {"id": "wrong_verb", "sentence": "A person eat a bike", "expected": 0.1},
    {"id": "object_variant_is_not_full_grounding", "sentence": "A person bike", "expected": 0.1},
]


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=''):
        self.status_code, self._payload, self.text = status_code, payload, text

    def json(self):
        if isinstance(self._payload, Exception):
            raise self._payload
        return self._payload


class FakeSession:
    """Replies with one score per text (len(text) / 100) unless `reply` overrides"""

    def __init__(self, reply=None, failures=()):
        self.reply, self.failures, self.calls = reply, list(failures), []

    def post(self, url, json=None, timeout=None):
        self.calls.append(json)
        if self.failures:
            raise self.failures.pop(0)
        if self.reply is not None:
            return self.reply(json)
        return FakeResponse(payload={'scores': [len(t) / 100 for t in json['texts']]})


def _client(session, **kwargs):
    return ITMClient('http://itm.test', session=session, wait=wait_none(), use_tunnel=False, **kwargs)


class TestMockScorer:

    @pytest.mark.parametrize("case", MOCK_CASES, ids=lambda x: x["id"])
    def test_levels(self, case):
        assert mock_oracle_score(RIDER, case["sentence"], MockScorerConfig(), BIKES) == case["expected"]
        assert MockScorer([RIDER], BIKES).score(RIDER, [case["sentence"]]).scores == [case["expected"]]

    def test_empty_sentence_list(self):
        assert MockScorer([RIDER], BIKES).score(RIDER, []).scores == []

    def test_lookup_by_image_id(self):
        assert MockScorer([RIDER], BIKES).score('img_0', ["A person ride a bike"]).scores == [2.0]

    def test_unknown_image_id(self):
        with pytest.raises(UnknownImageError):
            MockScorer([RIDER], BIKES).score('img_404', ["A person ride a bike"])

    def test_seeded_noise_is_reproducible(self):
        cfg = MockScorerConfig(noise_sigma=0.05, seed=3)
        first = MockScorer([RIDER], BIKES, cfg).score(RIDER, ["A person ride a bike", "A person eat a bike"])
        second = MockScorer([RIDER], BIKES, cfg).score(RIDER, ["A person ride a bike", "A person eat a bike"])
        assert first.scores == second.scores
        assert first.scores[0] != 2.0

    def test_noise_depends_on_seed(self):
        score = lambda seed: mock_oracle_score(RIDER, "A person ride a bike",
                                               MockScorerConfig(noise_sigma=0.05, seed=seed), BIKES)
        assert score(0) != score(1)

    def test_scores_never_negative(self):
        cfg = MockScorerConfig(negative_level=0.0, noise_sigma=1.0)
        scores = MockScorer([RIDER], BIKES, cfg).score(RIDER, [f"sentence {i}" for i in range(50)]).scores
        assert min(scores) >= 0.0

    def test_levels_must_be_ordered(self):
        with pytest.raises(ValueError):
            MockScorerConfig(positive_level=0.1, negative_level=0.2)

    def test_digest_stable_across_scoring(self):
        scorer = MockScorer([RIDER], BIKES)
        before = scorer.state_digest()
        scorer.score(RIDER, ["A person ride a bike"] * 3)
        assert scorer.state_digest() == before
        assert MockScorer([RIDER], BIKES, MockScorerConfig(seed=9)).state_digest() != before


class TestRemoteScorer:

    def test_vector_length_matches_sentences(self):
        scores = remote_score('http://itm.test', b'png', ["a", "bb"], session=FakeSession(), wait=wait_none(),
                              use_tunnel=False)
        assert scores.scores == [0.01, 0.02]

    def test_repeat_served_from_cache(self, tmp_path):
        session = FakeSession()
        scorer = RemoteScorer(_client(session), cache_url=f"sqlite:///{tmp_path / 'cache.db'}")
        first = scorer.score(b'image-bytes', ["A person ride a bike", "A person eat a bike"])
        calls = scorer.network_calls
        second = scorer.score(b'image-bytes', ["A person ride a bike", "A person eat a bike"])
        assert second.scores == first.scores
        assert scorer.network_calls == calls == 1

    def test_persistent_cache_survives_new_scorer(self, tmp_path):
        url = f"sqlite:///{tmp_path / 'cache.db'}"
        RemoteScorer(_client(FakeSession()), cache_url=url).score(b'bytes', ["x", "yy"])
        fresh = RemoteScorer(_client(FakeSession()), cache_url=url)
        assert fresh.score(b'bytes', ["yy", "x"]).scores == [0.02, 0.01]
        assert fresh.network_calls == 0

    def test_extra_scores_are_malformed(self):
        session = FakeSession(reply=lambda payload: FakeResponse(payload={'scores': [0.1, 0.2, 0.3]}))
        with pytest.raises(MalformedResponseError):
            _client(session).score(b'img', ["a", "b"])

    @pytest.mark.parametrize("payload", [{'scores': [-1.0]}, {'score': [0.5]}, ValueError("not json")],
                             ids=["negative_score", "wrong_key", "not_json"])
    def test_invalid_payload_is_malformed(self, payload):
        session = FakeSession(reply=lambda _: FakeResponse(payload=payload))
        with pytest.raises(MalformedResponseError):
            _client(session).score(b'img', ["a"])

    def test_status_error_not_retried(self):
        session = FakeSession(reply=lambda _: FakeResponse(status_code=503, text='busy'))
        with pytest.raises(ScorerStatusError) as info:
            _client(session, retries=3).score(b'img', ["a"])
        assert info.value.status_code == 503
        assert len(session.calls) == 1

    def test_timeouts_retried_then_fatal(self):
        session = FakeSession(failures=[requests.Timeout("slow")] * 3)
        with pytest.raises(ScorerTimeoutError):
            _client(session, retries=3).score(b'img', ["a"])
        assert len(session.calls) == 3

    def test_transient_failure_recovers(self):
        session = FakeSession(failures=[requests.ConnectionError("reset")])
        assert _client(session, retries=3).score(b'img', ["abc"]) == [0.03]

    def test_batches_keep_order(self):
        texts = [f"t{'x' * i}" for i in range(7)]
        session = FakeSession()
        assert _client(session, batch_size=2, max_workers=3).score(b'img', texts) == [len(t) / 100 for t in texts]
        assert len(session.calls) == 4

    def test_missing_image_bytes(self, tmp_path):
        scorer = RemoteScorer(_client(FakeSession()), cache_url=f"sqlite:///{tmp_path / 'cache.db'}")
        with pytest.raises(UnknownImageError):
            scorer.score(RIDER, ["A person ride a bike"])

    def test_build_scorer_mock_requires_vocabulary(self):
        with pytest.raises(ValueError):
            build_scorer('mock', [RIDER])


class FakeForwarder:
    instances = []

    def __init__(self, **kwargs):
        self.kwargs, self.started, self.stopped = kwargs, False, False
        self.local_bind_port = 18000
        FakeForwarder.instances.append(self)

    def start(self):
        self.started = True

    def stop(self):
        self.stopped = True


class TestSshTunnel:

    @pytest.mark.parametrize("username, key_path, expected", [
        (None, None, set()),
        ('alice', None, {'ssh_username'}),
        ('alice', '/keys/id', {'ssh_username', 'ssh_pkey'}),
    ], ids=["ssh_config", "user", "user_and_key"])
    def test_optional_auth(self, username, key_path, expected):
        kwargs = forwarder_kwargs('gpu-box', 8000, 8001, username, key_path)
        assert kwargs['ssh_address_or_host'] == ('gpu-box', 22)
        assert kwargs['remote_bind_address'] == ('localhost', 8000)
        assert set(kwargs) - {'ssh_address_or_host', 'remote_bind_address', 'local_bind_address'} == expected

    def test_client_routes_through_tunnel(self, monkeypatch):
        FakeForwarder.instances.clear()
        monkeypatch.setattr('utils.ssh_tunnel.SSHTunnelForwarder', FakeForwarder)
        client = ITMClient('http://ignored', session=FakeSession(), wait=wait_none(), use_tunnel=True)
        (tunnel,) = FakeForwarder.instances
        assert tunnel.started and client.url == 'http://localhost:18000/itm'
        assert client.score(b'img', ["ab"]) == [0.02]
        client.close()
        assert tunnel.stopped
