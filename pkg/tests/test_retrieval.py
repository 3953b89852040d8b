from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from workteam.registry import Registry, ComponentSpec, ParamDescription, BlankTemplate
from workteam.retrieval import (
    ComponentFilter,
    HashEmbedder,
    HttpEmbedder,
    RetrievalError,
    cosine_similarity,
    filter_components,
)


def make_registry(names_descriptions) -> Registry:
    components = {n: ComponentSpec(n, d) for n, d in names_descriptions}
    return Registry(
        components,
        {n: ParamDescription(n, {}) for n in components},
        {n: BlankTemplate(n, {}) for n in components},
    )


class TestCosine:
    def test_identical(self):
        assert cosine_similarity((1, 2, 2), (1, 2, 2)) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity((1, 0), (0, 1)) == 0.0

    def test_hand_computed(self):
        assert abs(cosine_similarity((1, 2, 2), (2, 1, 2)) - 8 / 9) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(RetrievalError):
            cosine_similarity((1, 2), (1, 2, 3))

    def test_zero_norm(self):
        with pytest.raises(RetrievalError):
            cosine_similarity((0, 0), (1, 2))
        with pytest.raises(RetrievalError):
            cosine_similarity((1, 2), (0, 0))

    @given(
        st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=6),
        st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=6),
        st.floats(min_value=0.01, max_value=50),
    )
    @settings(max_examples=200)
    def test_symmetric_and_scale_invariant(self, a, b, lam):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        assume(sum(x * x for x in a) > 1e-9 and sum(y * y for y in b) > 1e-9)
        assert abs(cosine_similarity(a, b) - cosine_similarity(b, a)) < 1e-12
        scaled = [lam * x for x in a]
        assert abs(cosine_similarity(scaled, b) - cosine_similarity(a, b)) < 1e-12

    def test_clamped_to_unit_interval(self):
        # dot/norms round so the raw ratio exceeds 1 by one ulp without clamping
        assert cosine_similarity((1, 1, 1), (1, 1, 1)) == 1.0


class TestHashEmbedder:
    def test_deterministic(self):
        e = HashEmbedder()
        assert e.embed("send an email") == e.embed("send an email")
        assert e.dimension() == 256

    def test_token_based(self):
        e = HashEmbedder(32)
        assert e.embed("alpha beta") == e.embed("beta alpha")
        assert e.embed("alpha") != e.embed("gamma")


class TestFilter:
    def test_case_study_candidates(self, casestudy_registry):
        inst = "monitor a mailbox and call an api"
        result = filter_components(inst, casestudy_registry, 10, HashEmbedder())
        assert sorted(sc.component.name for sc in result) == sorted(casestudy_registry.components)

    def test_single_component(self):
        reg = make_registry([("only", "does a thing")])
        result = filter_components("do the thing", reg, 1, HashEmbedder())
        assert [sc.component.name for sc in result] == ["only"]
        assert -1.0 <= result[0].score <= 1.0

    def test_k_must_be_positive(self, casestudy_registry):
        with pytest.raises(RetrievalError):
            filter_components("x", casestudy_registry, 0, HashEmbedder())

    def test_empty_registry(self):
        reg = make_registry([])
        with pytest.raises(RetrievalError):
            filter_components("x", reg, 1, HashEmbedder())

    def test_matches_reference_on_random_registries(self):
        rng = random.Random(7)
        words = ["mail", "api", "queue", "file", "web", "send", "watch", "map", "sms", "pay"]
        embedder = HashEmbedder(64)
        for trial in range(20):
            n = rng.randint(1, 50)
            items = [
                (f"comp-{i:03d}", " ".join(rng.choices(words, k=rng.randint(1, 6))))
                for i in range(n)
            ]
            reg = make_registry(items)
            inst = " ".join(rng.choices(words, k=4))
            for k in (1, 5, 10, n + 5):
                got = [sc.component.name for sc in filter_components(inst, reg, k, embedder)]
                assert got == oracles.topk_reference(inst, reg, k, embedder)

    def test_monotone_in_k(self, casestudy_registry):
        embedder = HashEmbedder()
        inst = "process a file then notify"
        previous = []
        for k in range(1, len(casestudy_registry) + 1):
            got = [sc.component.name for sc in filter_components(inst, casestudy_registry, k, embedder)]
            assert got[: len(previous)] == previous
            previous = got

    def test_insertion_order_invariance(self):
        items = [("b", "mail sender"), ("a", "mail sender"), ("c", "queue reader")]
        reg1 = make_registry(items)
        reg2 = make_registry(list(reversed(items)))
        embedder = HashEmbedder(32)
        got1 = [(sc.component.name, sc.score) for sc in filter_components("mail", reg1, 3, embedder)]
        got2 = [(sc.component.name, sc.score) for sc in filter_components("mail", reg2, 3, embedder)]
        assert got1 == got2
        # ties broken by ascending name
        assert [n for n, _ in got1[:2]] == ["a", "b"]

    def test_component_filter_caches_and_agrees(self, casestudy_registry):
        embedder = HashEmbedder()
        component_filter = ComponentFilter(casestudy_registry, embedder)
        inst = "upload a file"
        direct = filter_components(inst, casestudy_registry, 5, embedder)
        cached = component_filter.filter(inst, 5)
        assert [(sc.component.name, sc.score) for sc in direct] == [
            (sc.component.name, sc.score) for sc in cached
        ]


class _EmbedStub(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        vectors = [[float(len(t)), 1.0] for t in body["texts"]]
        payload = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def embed_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EmbedStub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_http_embedder_roundtrip(embed_server):
    embedder = HttpEmbedder(embed_server)
    assert embedder.embed("abcd") == (4.0, 1.0)
    assert embedder.dimension() == 2
    assert embedder.embed_batch(["a", "abc"]) == [(1.0, 1.0), (3.0, 1.0)]


def test_http_embedder_failure():
    embedder = HttpEmbedder("http://127.0.0.1:1", timeout=0.2)
    with pytest.raises(RetrievalError):
        embedder.embed("x")
