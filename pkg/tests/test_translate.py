import json
import logging
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from conftest import README_FIXTURES
from trifid.score import score_pair
from trifid.translate import (
    BackendTimeout,
    BackendTransportError,
    DropLinksBackend,
    EchoBackend,
    EmptyResponseError,
    FailingBackend,
    HttpBackend,
    SubprocessBackend,
    TranslationCache,
    TranslationJob,
    Translator,
    UnknownLanguageError,
    backend_from_spec,
    build_prompt,
    strip_links,
    unwrap_outer_fence,
)


class TestPrompt:
    def test_english_to_german(self):
        p = build_prompt("en", "de")
        assert "from English to German" in p
        assert p.startswith("You are an expert translator")
        assert "Preserve code blocks, links and markdown format exactly as they are." in p

    def test_french_target(self):
        assert "from English to French" in build_prompt("en", "fr")

    def test_byte_stable(self):
        assert build_prompt("en", "de").encode() == build_prompt("en", "de").encode()

    def test_same_language_rejected(self):
        with pytest.raises(ValueError):
            build_prompt("en", "en")

    def test_unknown_code_lists_known(self):
        with pytest.raises(UnknownLanguageError, match="known codes: .*de"):
            build_prompt("en", "xx")

    def test_hash_depends_on_inputs(self):
        a = TranslationJob.create("text", "en", "de", "b1")
        assert a.content_hash == TranslationJob.create("text", "en", "de", "b1").content_hash
        assert a.content_hash != TranslationJob.create("text", "en", "fr", "b1").content_hash
        assert a.content_hash != TranslationJob.create("text!", "en", "de", "b1").content_hash
        assert a.content_hash != TranslationJob.create("text", "en", "de", "b2").content_hash


class TestMocks:
    @pytest.mark.parametrize("path", README_FIXTURES[:8], ids=lambda p: p.stem)
    def test_echo_end_to_end(self, path):
        text = path.read_text(encoding="utf-8")
        tr = Translator(EchoBackend())
        out = tr.translate(tr.job(text)).translated_text
        assert out == text
        r = score_pair(text, out)
        assert (r.code.total, r.url.total, r.markdown.total) == (100, 100, 100)

    @pytest.mark.parametrize("path", README_FIXTURES, ids=lambda p: p.stem)
    def test_drop_links(self, path):
        text = path.read_text(encoding="utf-8")
        tr = Translator(DropLinksBackend())
        out = tr.translate(tr.job(text)).translated_text
        r = score_pair(text, out)
        assert r.url.n_preserved == 0
        # every link lost, no extras: only the no-extra bonus remains
        assert r.url.total == 30
        assert r.code.total == 100
        assert r.markdown.total == 100

    def test_strip_links_leaves_code(self):
        text = "See [a](https://a.io) <https://b.io>\n```\ncurl https://c.io\n```\n[r]: https://d.io\n"
        out = strip_links(text)
        assert "https://c.io" in out
        assert "a.io" not in out and "b.io" not in out and "d.io" not in out


class TestRetriesAndErrors:
    def test_failing_backend_three_attempts(self):
        backend = FailingBackend()
        sleeps = []
        tr = Translator(backend, sleep=sleeps.append)
        with pytest.raises(BackendTransportError):
            tr.translate(tr.job("hello"))
        assert backend.calls == 3
        assert sleeps == [1.0, 2.0]

    def test_retry_then_success(self):
        class Flaky:
            backend_id = "flaky"
            calls = 0

            def complete(self, request):
                self.calls += 1
                if self.calls < 3:
                    raise BackendTimeout("slow")
                return {"translated_text": "ok", "meta": {"n": self.calls}}

        tr = Translator(Flaky(), sleep=lambda s: None)
        res = tr.translate(tr.job("x"))
        assert res.translated_text == "ok"
        assert json.loads(res.backend_meta) == {"n": 3}

    def test_empty_response_is_distinct_and_not_retried(self):
        class Empty:
            backend_id = "empty"
            calls = 0

            def complete(self, request):
                self.calls += 1
                return {"translated_text": "", "meta": ""}

        b = Empty()
        tr = Translator(b, sleep=lambda s: None)
        with pytest.raises(EmptyResponseError):
            tr.translate(tr.job("x"))
        assert b.calls == 1

    def test_error_kinds_are_distinct(self):
        assert not issubclass(BackendTimeout, BackendTransportError)
        assert not issubclass(EmptyResponseError, BackendTransportError)


ECHO_SCRIPT = """
import json, sys
req = json.load(sys.stdin)
assert set(req) >= {"prompt", "source_text", "source_lang", "target_lang"}
json.dump({"translated_text": req["source_text"].upper(), "meta": req.get("settings", "")}, sys.stdout)
"""


class TestSubprocessBackend:
    def test_round_trip(self, tmp_path):
        script = tmp_path / "be.py"
        script.write_text(ECHO_SCRIPT)
        backend = SubprocessBackend([sys.executable, str(script)], settings="temperature=0")
        tr = Translator(backend)
        res = tr.translate(tr.job("hello"))
        assert res.translated_text == "HELLO"
        assert res.backend_meta == "temperature=0"
        assert "temperature=0" in backend.backend_id

    def test_timeout(self, tmp_path):
        script = tmp_path / "slow.py"
        script.write_text("import time; time.sleep(5)")
        tr = Translator(SubprocessBackend([sys.executable, str(script)], timeout=0.2), attempts=1)
        with pytest.raises(BackendTimeout):
            tr.translate(tr.job("x"))

    def test_nonzero_exit(self, tmp_path):
        script = tmp_path / "bad.py"
        script.write_text("import sys; sys.stderr.write('boom'); sys.exit(3)")
        tr = Translator(SubprocessBackend([sys.executable, str(script)]), attempts=1)
        with pytest.raises(BackendTransportError, match="boom"):
            tr.translate(tr.job("x"))

    def test_missing_command(self):
        tr = Translator(SubprocessBackend(["/nonexistent/translator"]), sleep=lambda s: None)
        with pytest.raises(BackendTransportError):
            tr.translate(tr.job("x"))

    def test_garbage_output(self, tmp_path):
        script = tmp_path / "junk.py"
        script.write_text("print('not json')")
        tr = Translator(SubprocessBackend([sys.executable, str(script)]), attempts=1)
        with pytest.raises(BackendTransportError, match="not JSON"):
            tr.translate(tr.job("x"))


@pytest.fixture
def http_backend_url():
    received = []

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            received.append(body)
            out = json.dumps({"translated_text": body["source_text"][::-1], "meta": "http"}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/translate", received
    server.shutdown()
    server.server_close()


class TestHttpBackend:
    def test_round_trip(self, http_backend_url):
        url, received = http_backend_url
        tr = Translator(HttpBackend(url))
        res = tr.translate(tr.job("abc", "en", "fr"))
        assert res.translated_text == "cba"
        assert received[0]["target_lang"] == "fr"
        assert "from English to French" in received[0]["prompt"]

    def test_unreachable_is_transport_error_after_three_attempts(self):
        sleeps = []
        tr = Translator(HttpBackend("http://127.0.0.1:9/none", timeout=1), sleep=sleeps.append)
        with pytest.raises(BackendTransportError):
            tr.translate(tr.job("x"))
        assert len(sleeps) == 2


class TestCache:
    def test_repeated_job_hits_cache(self):
        backend = EchoBackend()
        tr = Translator(backend)
        job = tr.job("same text")
        first = tr.translate(job)
        second = tr.translate(job)
        assert backend.calls == 1
        assert not first.cached and second.cached
        assert first.translated_text == second.translated_text

    def test_disk_cache_survives_new_translator(self, tmp_path):
        b1 = EchoBackend()
        tr1 = Translator(b1, cache=TranslationCache(tmp_path))
        tr1.translate(tr1.job("persist me"))
        b2 = EchoBackend()
        tr2 = Translator(b2, cache=TranslationCache(tmp_path))
        res = tr2.translate(tr2.job("persist me"))
        assert b2.calls == 0
        assert res.cached and res.translated_text == "persist me"
        assert len(list(tmp_path.glob("*.json"))) == 1

    def test_concurrent_identical_jobs_call_backend_once(self):
        class Slow(EchoBackend):
            def complete(self, request):
                time.sleep(0.05)
                return super().complete(request)

        backend = Slow()
        tr = Translator(backend, concurrency=8)
        jobs = [tr.job("dup")] * 16 + [tr.job("other")] * 16
        results = tr.translate_many(jobs)
        assert backend.calls == 2
        assert [r.translated_text for r in results] == ["dup"] * 16 + ["other"] * 16

    def test_concurrency_is_bounded(self):
        active = 0
        peak = 0
        lock = threading.Lock()

        class Counting:
            backend_id = "counting"

            def complete(self, request):
                nonlocal active, peak
                with lock:
                    active += 1
                    peak = max(peak, active)
                time.sleep(0.02)
                with lock:
                    active -= 1
                return {"translated_text": request["source_text"], "meta": ""}

        tr = Translator(Counting())
        tr.translate_many([tr.job(f"doc {i}") for i in range(10)])
        assert peak <= 2


class TestPassThrough:
    def test_byte_identical(self):
        text = "  leading\r\n# Title  \n\n```\ncode\t\n```\n\n\n"
        tr = Translator(EchoBackend())
        assert tr.translate(tr.job(text)).translated_text == text

    def test_unwrap_is_opt_in(self):
        class Wrapped:
            backend_id = "wrapped"

            def complete(self, request):
                return {"translated_text": "```markdown\n# Titel\n```\n", "meta": ""}

        assert Translator(Wrapped()).translate(TranslationJob.create("# T", "en", "de", "w")).translated_text.startswith("```")
        tr = Translator(Wrapped(), unwrap_fence=True)
        assert tr.translate(tr.job("# T")).translated_text == "# Titel\n"

    def test_unwrap_leaves_real_code(self):
        text = "```\na\n```\ntext\n```\nb\n```"
        assert unwrap_outer_fence(text) == text

    def test_size_guard_warns(self, caplog):
        tr = Translator(EchoBackend(), max_bytes=10)
        with caplog.at_level(logging.WARNING, logger="trifid.translate"):
            tr.translate(tr.job("x" * 11))
        assert "bytes" in caplog.text


class TestBackendSpec:
    def test_mocks_and_transports(self):
        assert isinstance(backend_from_spec("echo"), EchoBackend)
        assert isinstance(backend_from_spec("drop-links"), DropLinksBackend)
        assert isinstance(backend_from_spec("http://localhost:1/x"), HttpBackend)
        assert isinstance(backend_from_spec("cmd:python3 be.py"), SubprocessBackend)

    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv("TRIFID_BACKEND", "echo")
        assert isinstance(backend_from_spec(None), EchoBackend)

    def test_missing_and_unknown(self, monkeypatch):
        monkeypatch.delenv("TRIFID_BACKEND", raising=False)
        with pytest.raises(ValueError):
            backend_from_spec(None)
        with pytest.raises(ValueError):
            backend_from_spec("carrier-pigeon")
