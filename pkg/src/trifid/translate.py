"""Translation jobs against pluggable backends.

A backend takes a JSON request ``{prompt, source_text, source_lang,
target_lang}`` and answers ``{translated_text, meta}``.  Two transports are
provided (a subprocess speaking JSON over stdin/stdout, and HTTP POST) plus
offline mocks used by tests and dry runs.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import shlex
import subprocess
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

from trifid.extract import fence_regions

logger = logging.getLogger(__name__)

ENV_BACKEND = "TRIFID_BACKEND"
ENV_CACHE_DIR = "TRIFID_CACHE_DIR"
ENV_SETTINGS = "TRIFID_BACKEND_SETTINGS"

DEFAULT_MAX_BYTES = 100 * 1024

LANGUAGES = {
    "ar": "Arabic",
    "de": "German",
    "en": "English",
    "es": "Spanish",
    "fr": "French",
    "hi": "Hindi",
    "it": "Italian",
    "ja": "Japanese",
    "ko": "Korean",
    "nl": "Dutch",
    "pl": "Polish",
    "pt": "Portuguese",
    "ru": "Russian",
    "sv": "Swedish",
    "tr": "Turkish",
    "uk": "Ukrainian",
    "vi": "Vietnamese",
    "zh": "Chinese",
}

PROMPT_TEMPLATE = (
    "You are an expert translator, please translate the following Markdown content "
    "from {source} to {target}. "
    "Preserve code blocks, links and markdown format exactly as they are."
)


class BackendError(RuntimeError):
    """Base class for backend failures."""


class BackendTimeout(BackendError):
    pass


class BackendTransportError(BackendError):
    pass


class EmptyResponseError(BackendError):
    pass


class UnknownLanguageError(ValueError):
    pass


def build_prompt(source_lang: str, target_lang: str) -> str:
    for code in (source_lang, target_lang):
        if not code or code not in LANGUAGES:
            known = ", ".join(sorted(LANGUAGES))
            raise UnknownLanguageError(f"unknown language code {code!r}; known codes: {known}")
    if source_lang == target_lang:
        raise ValueError(f"source and target language are both {source_lang!r}")
    return PROMPT_TEMPLATE.format(source=LANGUAGES[source_lang], target=LANGUAGES[target_lang])


def content_hash(prompt: str, source_text: str, backend_id: str) -> str:
    h = hashlib.sha256()
    for part in (prompt, source_text, backend_id):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


@dataclass(frozen=True)
class TranslationJob:
    source_text: str
    source_lang: str
    target_lang: str
    prompt: str
    backend_id: str

    @classmethod
    def create(cls, source_text: str, source_lang: str, target_lang: str, backend_id: str) -> "TranslationJob":
        return cls(source_text, source_lang, target_lang, build_prompt(source_lang, target_lang), backend_id)

    @property
    def content_hash(self) -> str:
        return content_hash(self.prompt, self.source_text, self.backend_id)

    def request(self) -> dict:
        return {
            "prompt": self.prompt,
            "source_text": self.source_text,
            "source_lang": self.source_lang,
            "target_lang": self.target_lang,
        }


@dataclass(frozen=True)
class BackendResult:
    translated_text: str
    latency: float
    backend_meta: str = ""
    cached: bool = False


class Backend(Protocol):
    backend_id: str

    def complete(self, request: dict) -> dict: ...


def _parse_response(raw: str | bytes, where: str) -> dict:
    try:
        body = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BackendTransportError(f"{where}: response is not JSON ({exc})") from None
    if not isinstance(body, dict):
        raise BackendTransportError(f"{where}: response is not a JSON object")
    return body


class SubprocessBackend:
    """Run a command per request; JSON request on stdin, JSON response on stdout."""

    def __init__(self, command: str | list[str], timeout: float = 300.0, settings: str = ""):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.settings = settings
        self.backend_id = "cmd:" + " ".join(self.argv) + (f"#{settings}" if settings else "")

    def complete(self, request: dict) -> dict:
        payload = dict(request)
        if self.settings:
            payload["settings"] = self.settings
        try:
            proc = subprocess.run(
                self.argv,
                input=json.dumps(payload).encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired:
            raise BackendTimeout(f"{self.backend_id}: no answer within {self.timeout}s") from None
        except OSError as exc:
            raise BackendTransportError(f"{self.backend_id}: {exc}") from None
        if proc.returncode != 0:
            err = proc.stderr.decode("utf-8", "replace").strip()
            raise BackendTransportError(f"{self.backend_id}: exit status {proc.returncode}: {err}")
        return _parse_response(proc.stdout, self.backend_id)


class HttpBackend:
    """POST the JSON request to ``url``."""

    def __init__(self, url: str, timeout: float = 300.0, settings: str = ""):
        self.url = url
        self.timeout = timeout
        self.settings = settings
        self.backend_id = url + (f"#{settings}" if settings else "")

    def complete(self, request: dict) -> dict:
        payload = dict(request)
        if self.settings:
            payload["settings"] = self.settings
        req = urllib.request.Request(
            self.url,
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except TimeoutError:
            raise BackendTimeout(f"{self.url}: no answer within {self.timeout}s") from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise BackendTimeout(f"{self.url}: no answer within {self.timeout}s") from None
            raise BackendTransportError(f"{self.url}: {exc}") from None
        except OSError as exc:
            raise BackendTransportError(f"{self.url}: {exc}") from None
        return _parse_response(raw, self.url)


class EchoBackend:
    """Returns the source unchanged."""

    backend_id = "mock:echo"

    def __init__(self):
        self.calls = 0

    def complete(self, request: dict) -> dict:
        self.calls += 1
        return {"translated_text": request["source_text"], "meta": "echo"}


_LINK_DEST = re.compile(r"\]\([^)]*\)")
_AUTOLINK = re.compile(r"<[A-Za-z][A-Za-z0-9.+-]{1,31}:[^\s<>]*>")
_BARE = re.compile(r"https?://\S+")
_REFDEF = re.compile(r"^( {0,3}\[[^\]]+\]:).*$")


def strip_links(text: str) -> str:
    """Remove every link target outside fenced code, keeping link text."""
    lines = text.split("\n")
    in_code = set()
    for start, end, _ in fence_regions([ln.rstrip("\r") for ln in lines]):
        in_code.update(range(start, end + 1))
    out = []
    for i, line in enumerate(lines):
        if i not in in_code:
            line = _REFDEF.sub(r"\1", line)
            line = _LINK_DEST.sub("]", line)
            line = _AUTOLINK.sub("", line)
            line = _BARE.sub("", line)
        out.append(line)
    return "\n".join(out)


class DropLinksBackend:
    """Echoes the source with every URL removed; code blocks untouched."""

    backend_id = "mock:drop-links"

    def __init__(self):
        self.calls = 0

    def complete(self, request: dict) -> dict:
        self.calls += 1
        return {"translated_text": strip_links(request["source_text"]), "meta": "drop-links"}


class FailingBackend:
    """Always raises a transport error; exercises retry paths."""

    backend_id = "mock:fail"

    def __init__(self):
        self.calls = 0

    def complete(self, request: dict) -> dict:
        self.calls += 1
        raise BackendTransportError(f"{self.backend_id}: backend unreachable")


MOCKS: dict[str, Callable[[], Backend]] = {
    "echo": EchoBackend,
    "drop-links": DropLinksBackend,
    "fail": FailingBackend,
}


def backend_from_spec(spec: str | None, timeout: float = 300.0, settings: str | None = None) -> Backend:
    """Build a backend from ``echo``/``drop-links``/``fail``, an http(s) URL, or ``cmd:<command>``.

    Falls back to ``$TRIFID_BACKEND`` when ``spec`` is empty.
    """
    spec = spec or os.environ.get(ENV_BACKEND)
    if settings is None:
        settings = os.environ.get(ENV_SETTINGS, "")
    if not spec:
        raise ValueError(f"no backend given (use --backend or set {ENV_BACKEND})")
    if spec in MOCKS:
        return MOCKS[spec]()
    if spec.startswith(("http://", "https://")):
        return HttpBackend(spec, timeout=timeout, settings=settings)
    if spec.startswith("cmd:"):
        return SubprocessBackend(spec[4:], timeout=timeout, settings=settings)
    raise ValueError(f"unrecognized backend {spec!r}; expected one of {sorted(MOCKS)}, a URL, or cmd:<command>")


def unwrap_outer_fence(text: str) -> str:
    """If the whole response is one fenced block, return its interior."""
    lines = text.strip("\n").split("\n")
    if len(lines) < 2:
        return text
    m = re.match(r"^(`{3,}|~{3,})\s*[\w-]*\s*$", lines[0])
    if not m or lines[-1].strip() != m.group(1):
        return text
    inner = "\n".join(lines[1:-1])
    # an inner fence of the same marker means it was not a single wrapper
    if re.search(r"^" + re.escape(m.group(1)) + r"\s*$", inner, re.MULTILINE):
        return text
    return inner + ("\n" if text.endswith("\n") else "")


class TranslationCache:
    """In-memory cache mirrored to an optional directory of ``<hash>.json`` files."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, BackendResult] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    def key_lock(self, key: str) -> threading.Lock:
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def get(self, key: str) -> BackendResult | None:
        with self._lock:
            hit = self._mem.get(key)
        if hit is not None:
            return hit
        if self.directory:
            path = self.directory / f"{key}.json"
            if path.exists():
                data = json.loads(path.read_text(encoding="utf-8"))
                result = BackendResult(data["translated_text"], data.get("latency", 0.0), data.get("meta", ""))
                with self._lock:
                    self._mem[key] = result
                return result
        return None

    def put(self, key: str, result: BackendResult) -> None:
        with self._lock:
            self._mem[key] = result
        if self.directory:
            tmp = self.directory / f".{key}.{threading.get_ident()}.tmp"
            tmp.write_text(
                json.dumps(
                    {"translated_text": result.translated_text, "latency": result.latency, "meta": result.backend_meta},
                    ensure_ascii=False,
                ),
                encoding="utf-8",
            )
            os.replace(tmp, self.directory / f"{key}.json")


class RateLimiter:
    def __init__(self, min_interval: float = 0.0):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.min_interval
        if delay > 0:
            time.sleep(delay)


@dataclass
class Translator:
    backend: Backend
    cache: TranslationCache = field(default_factory=TranslationCache)
    attempts: int = 3
    backoff: float = 1.0
    max_bytes: int = DEFAULT_MAX_BYTES
    unwrap_fence: bool = False
    concurrency: int = 2
    min_interval: float = 0.0
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        self._limiter = RateLimiter(self.min_interval)

    def job(self, source_text: str, source_lang: str = "en", target_lang: str = "de") -> TranslationJob:
        return TranslationJob.create(source_text, source_lang, target_lang, self.backend.backend_id)

    def translate(self, job: TranslationJob) -> BackendResult:
        """Run ``job`` (or serve it from cache).

        Timeouts and transport failures are retried with exponential backoff up
        to ``attempts`` times; an empty answer is not retried.
        """
        key = job.content_hash
        with self.cache.key_lock(key):
            hit = self.cache.get(key)
            if hit is not None:
                return BackendResult(hit.translated_text, hit.latency, hit.backend_meta, cached=True)
            size = len(job.source_text.encode("utf-8"))
            if self.max_bytes and size > self.max_bytes:
                logger.warning("source is %d bytes (> %d); fidelity tends to drop on long inputs", size, self.max_bytes)
            result = self._call_with_retry(job)
            self.cache.put(key, result)
            return result

    def _call_with_retry(self, job: TranslationJob) -> BackendResult:
        last: BackendError | None = None
        for attempt in range(1, self.attempts + 1):
            self._limiter.wait()
            start = time.monotonic()
            try:
                body = self.backend.complete(job.request())
            except (BackendTimeout, BackendTransportError) as exc:
                last = exc
                logger.warning("attempt %d/%d failed: %s", attempt, self.attempts, exc)
                if attempt < self.attempts:
                    self.sleep(self.backoff * 2 ** (attempt - 1))
                continue
            latency = time.monotonic() - start
            text = body.get("translated_text")
            if not isinstance(text, str) or not text:
                raise EmptyResponseError(f"{self.backend.backend_id}: empty translation")
            if self.unwrap_fence:
                unwrapped = unwrap_outer_fence(text)
                if unwrapped != text:
                    logger.info("stripped an outer code fence from the %s response", self.backend.backend_id)
                    text = unwrapped
            meta = body.get("meta", "")
            return BackendResult(text, latency, meta if isinstance(meta, str) else json.dumps(meta, sort_keys=True))
        assert last is not None
        raise last

    def translate_many(self, jobs: Iterable[TranslationJob]) -> list[BackendResult]:
        """Translate with at most ``concurrency`` jobs in flight; results keep input order."""
        jobs = list(jobs)
        with ThreadPoolExecutor(max_workers=max(1, self.concurrency)) as pool:
            return list(pool.map(self.translate, jobs))
