"""Request streams: random traffic, adversarial scripts and the mixed regime.

Adversarial scripts are built from a template and then replayed under the
three stateless fit policies; a candidate is kept only when exactly the
intended policy survives it.

bf-good template: the page is filled left to right, then two or three holes
of distinct sizes are freed with the largest hole at the lowest address. The
challenge allocations request each hole size in ascending order. Best-fit
fills every hole exactly; first- and worst-fit both split the largest hole on
the first challenge and cannot serve the last one.

wf-good template: two holes ``a < b`` (``a`` at the lower address) and a
first challenge ``c`` with ``b - a <= c < a``, followed by ``a`` and
``b - c``. Worst-fit puts ``c`` into ``b`` and everything fits; first- and
best-fit put ``c`` into ``a`` and the final request finds no room.

After the challenges a random subset of the filler blocks is freed so the
random traffic that follows has room to run.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from . import baselines
from ._validation import ConfigError, check_choice, check_positive_int, check_probability
from .page import PageState

MODES = ("random", "bf_good", "wf_good", "mixed")
LABELS = ("bf_good", "wf_good", "random_segment")
MAX_ATTEMPTS = 1000
MIN_ADVERSARIAL_PAGE = 8

# label -> (policy that must survive, policies that must fail)
EXPECTED_PATTERN = {
    "bf_good": ("best", ("first", "worst")),
    "wf_good": ("worst", ("first", "best")),
}


class ScriptError(ValueError):
    """A script frees an unknown or already-freed tag, or reuses a live tag."""


class GenerationError(RuntimeError):
    pass


class Alloc(NamedTuple):
    size: int
    tag: str


class Free(NamedTuple):
    tag: str


Event = Union[Alloc, Free]


@dataclass
class RequestScript:
    events: List[Event]
    label: str
    page_size: int
    seed: Optional[int] = None

    @property
    def allocs(self) -> List[Alloc]:
        return [e for e in self.events if isinstance(e, Alloc)]


@dataclass
class WorkloadConfig:
    page_size: int
    p_free: float = 0.4
    p_alloc: float = 0.6
    size_range: Optional[Tuple[int, int]] = None
    mode: str = "random"
    segment_random_len: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        self.page_size = check_positive_int(self.page_size, "workload.page_size")
        self.p_free = check_probability(self.p_free, "workload.p_free")
        self.p_alloc = check_probability(self.p_alloc, "workload.p_alloc")
        if abs(self.p_free + self.p_alloc - 1.0) > 1e-9:
            raise ConfigError(
                ("workload.p_free", "workload.p_alloc"),
                f"must sum to 1, got {self.p_free} + {self.p_alloc}",
            )
        if self.size_range is None:
            self.size_range = (1, max(1, self.page_size // 8))
        lo, hi = (int(v) for v in self.size_range)
        if not 1 <= lo <= hi <= self.page_size:
            raise ConfigError(
                "workload.size_range",
                f"must satisfy 1 <= lo <= hi <= page_size ({self.page_size}), got {lo},{hi}",
            )
        self.size_range = (lo, hi)
        check_choice(self.mode, "workload.mode", MODES)
        if self.mode in ("bf_good", "wf_good", "mixed") and self.page_size < MIN_ADVERSARIAL_PAGE:
            raise ConfigError(
                ("workload.mode", "workload.page_size"),
                f"adversarial modes need page_size >= {MIN_ADVERSARIAL_PAGE}",
            )
        self.segment_random_len = check_positive_int(
            self.segment_random_len, "workload.segment_random_len"
        )


# -- verification ------------------------------------------------------------


@dataclass
class PolicyOutcome:
    ok: bool
    # 1-based ordinal of the first Alloc the policy could not place
    failed_at: Optional[int]
    page: PageState


@dataclass
class VerificationReport:
    outcomes: Dict[str, PolicyOutcome]

    def matches(self, label: str) -> bool:
        """True when the outcome pattern is the one ``label`` promises."""
        if label not in EXPECTED_PATTERN:
            return all(o.ok for o in self.outcomes.values())
        winner, losers = EXPECTED_PATTERN[label]
        return self.outcomes[winner].ok and not any(self.outcomes[k].ok for k in losers)

    def summary(self) -> str:
        parts = []
        for kind in baselines.HIGH_LEVEL_KINDS:
            o = self.outcomes[kind]
            parts.append(f"{kind}: OK" if o.ok else f"{kind}: FAIL@{o.failed_at}")
        order = {"best": 0, "first": 1, "worst": 2}
        return ", ".join(sorted(parts, key=lambda p: order[p.split(":")[0]]))


def check_script(events: List[Event]) -> None:
    live = set()
    for i, ev in enumerate(events):
        if isinstance(ev, Alloc):
            if ev.size < 1:
                raise ScriptError(f"event {i}: alloc size {ev.size} < 1")
            if ev.tag in live:
                raise ScriptError(f"event {i}: tag {ev.tag!r} allocated while still live")
            live.add(ev.tag)
        else:
            if ev.tag not in live:
                raise ScriptError(f"event {i}: free of unknown or already-freed tag {ev.tag!r}")
            live.discard(ev.tag)


def replay(events: List[Event], page_size: int, kind: str) -> PolicyOutcome:
    page = PageState(page_size)
    n_alloc = 0
    for ev in events:
        if isinstance(ev, Alloc):
            n_alloc += 1
            start = baselines.place(kind, page, ev.size)
            if start is None:
                return PolicyOutcome(False, n_alloc, page)
            page.allocate(start, ev.size, ev.tag)
        else:
            page.free(ev.tag)
    return PolicyOutcome(True, None, page)


def verify_adversarial(script: RequestScript, page_size: Optional[int] = None) -> VerificationReport:
    page_size = script.page_size if page_size is None else page_size
    check_script(script.events)
    return VerificationReport(
        {kind: replay(script.events, page_size, kind) for kind in baselines.HIGH_LEVEL_KINDS}
    )


# -- adversarial construction --------------------------------------------------


def _split(total: int, max_block: int, rng: np.random.Generator) -> List[int]:
    sizes = []
    while total > 0:
        s = int(rng.integers(1, min(max_block, total) + 1))
        sizes.append(s)
        total -= s
    return sizes


def _layout(page_size: int, holes: List[int], rng: np.random.Generator) -> Optional[List[Tuple[str, int]]]:
    """Address-ordered ``(kind, size)`` segments covering the page.

    ``kind`` is ``"hole"`` or ``"fill"``; consecutive holes are separated by at
    least one fill block. Returns None if the holes do not fit.
    """
    m = len(holes)
    spare = page_size - sum(holes) - (m - 1)
    if spare < 0:
        return None
    # m + 1 gaps: before the first hole, between holes, after the last one
    gaps = rng.multinomial(spare, [1.0 / (m + 1)] * (m + 1))
    gaps[1:m] += 1
    max_block = max(1, page_size // 8)
    out: List[Tuple[str, int]] = []
    for i in range(m + 1):
        out.extend(("fill", s) for s in _split(int(gaps[i]), max_block, rng))
        if i < m:
            out.append(("hole", holes[i]))
    return out


def _hole_max(page_size: int) -> int:
    return max(3, page_size // 6)


def _build_script(
    page_size: int,
    holes: List[int],
    challenges: List[int],
    label: str,
    rng: np.random.Generator,
) -> Optional[RequestScript]:
    layout = _layout(page_size, holes, rng)
    if layout is None:
        return None
    events: List[Event] = []
    hole_tags, fill_tags = [], []
    for i, (kind, size) in enumerate(layout):
        tag = str(i)
        events.append(Alloc(size, tag))
        (hole_tags if kind == "hole" else fill_tags).append(tag)
    for j in rng.permutation(len(hole_tags)):
        events.append(Free(hole_tags[j]))
    n = len(layout)
    for k, size in enumerate(challenges):
        events.append(Alloc(int(size), str(n + k)))
    for j in rng.permutation(len(fill_tags)):
        if rng.random() < 0.5:
            events.append(Free(fill_tags[j]))
    return RequestScript(events, label, page_size)


def _bf_candidate(page_size: int, rng: np.random.Generator) -> Optional[RequestScript]:
    hmax = _hole_max(page_size)
    m = 2 if page_size < 16 else int(rng.integers(2, 4))
    holes = sorted((int(h) for h in rng.choice(np.arange(1, hmax + 1), size=m, replace=False)), reverse=True)
    # largest hole lowest; the rest in random order
    rest = [holes[1 + j] for j in rng.permutation(m - 1)]
    return _build_script(page_size, [holes[0]] + rest, sorted(holes), "bf_good", rng)


def _wf_candidate(page_size: int, rng: np.random.Generator) -> Optional[RequestScript]:
    hmax = _hole_max(page_size)
    a = int(rng.integers(2, hmax + 1))
    b = int(rng.integers(a + 1, 2 * a))
    c = int(rng.integers(b - a, a))
    return _build_script(page_size, [a, b], [c, a, b - c], "wf_good", rng)


def _make(label: str, page_size: int, rng: np.random.Generator) -> RequestScript:
    if page_size < MIN_ADVERSARIAL_PAGE:
        raise GenerationError(f"{label} scripts need page_size >= {MIN_ADVERSARIAL_PAGE}, got {page_size}")
    candidate = _bf_candidate if label == "bf_good" else _wf_candidate
    for _ in range(MAX_ATTEMPTS):
        script = candidate(page_size, rng)
        if script is not None and verify_adversarial(script).matches(label):
            return script
    raise GenerationError(f"no valid {label} script for page_size {page_size} after {MAX_ATTEMPTS} attempts")


def make_bf_good(page_size: int, rng: np.random.Generator) -> RequestScript:
    return _make("bf_good", page_size, rng)


def make_wf_good(page_size: int, rng: np.random.Generator) -> RequestScript:
    return _make("wf_good", page_size, rng)


# -- script files ----------------------------------------------------------------


def dumps_script(script: RequestScript) -> str:
    buf = io.StringIO()
    seed = "none" if script.seed is None else str(script.seed)
    buf.write(f"page_size={script.page_size} label={script.label} seed={seed}\n")
    for ev in script.events:
        if isinstance(ev, Alloc):
            buf.write(f"A {ev.size} {ev.tag}\n")
        else:
            buf.write(f"F {ev.tag}\n")
    return buf.getvalue()


def loads_script(text: str) -> RequestScript:
    lines = text.splitlines()
    if not lines:
        raise ScriptError("empty script file")
    try:
        header = dict(item.split("=", 1) for item in lines[0].split())
        page_size = int(header["page_size"])
        label = header["label"]
        seed = None if header["seed"] == "none" else int(header["seed"])
    except (KeyError, ValueError) as exc:
        raise ScriptError(f"bad header line {lines[0]!r}") from exc
    events: List[Event] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) == 3 and parts[0] == "A":
            events.append(Alloc(int(parts[1]), parts[2]))
        elif len(parts) == 2 and parts[0] == "F":
            events.append(Free(parts[1]))
        else:
            raise ScriptError(f"line {lineno}: cannot parse {line!r}")
    return RequestScript(events, label, page_size, seed)


def write_script(script: RequestScript, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_script(script))


def read_script(path) -> RequestScript:
    with open(path, encoding="utf-8") as fh:
        return loads_script(fh.read())


# -- request generator -------------------------------------------------------------


class Workload:
    """Stateful request generator driven by one RNG.

    The environment calls :meth:`next_request` to get the size the agent must
    serve next (applying any frees that precede it), then :meth:`bind` with
    the id of the block it allocated so scripted frees can find it.
    """

    def __init__(self, cfg: WorkloadConfig, rng: np.random.Generator,
                 script: Optional[RequestScript] = None):
        self.cfg = cfg
        self.rng = rng
        self._events: Deque[Event] = deque()
        self._tags: Dict[str, object] = {}
        self._pending: Optional[str] = None
        self._random_left = 0
        self._script_loaded = False
        self.segments: List[str] = []
        self.scripts: List[RequestScript] = []
        if script is not None:
            self._load(script)

    def _load(self, script: RequestScript) -> None:
        self._events = deque(script.events)
        self._tags = {}
        self._script_loaded = True
        self.segments.append(script.label)
        self.scripts.append(script)

    def draw_segment_kind(self) -> str:
        return LABELS[int(self.rng.integers(0, 3))]

    def _refill(self, page: PageState) -> int:
        """Queue the next segment; returns the number of frees it applied."""
        mode = self.cfg.mode
        if mode in ("bf_good", "wf_good") and not self._script_loaded:
            make = make_bf_good if mode == "bf_good" else make_wf_good
            self._load(make(self.cfg.page_size, self.rng))
            return 0
        if mode != "mixed":
            return 0
        kind = self.draw_segment_kind()
        if kind == "random_segment":
            self._random_left = self.cfg.segment_random_len
            self.segments.append(kind)
            return 0
        make = make_bf_good if kind == "bf_good" else make_wf_good
        script = make(self.cfg.page_size, self.rng)
        # adversarial setups are laid out on an empty page
        frees = 0
        for bid in list(page.blocks):
            page.free(bid)
            frees += 1
        self._load(script)
        return frees

    def next_request(self, page: PageState) -> Tuple[int, int]:
        """Advance to the next allocation request; returns (size, frees applied)."""
        self._pending = None
        frees = 0
        while True:
            if not self._events and self._random_left == 0:
                frees += self._refill(page)
            if self._events:
                ev = self._events.popleft()
                if isinstance(ev, Free):
                    page.free(self._tags.pop(ev.tag))
                    frees += 1
                    continue
                self._pending = ev.tag
                return ev.size, frees
            # random tick
            if self.rng.random() < self.cfg.p_free:
                if page.blocks:
                    ids = list(page.blocks)
                    page.free(ids[int(self.rng.integers(0, len(ids)))])
                    frees += 1
                continue
            lo, hi = self.cfg.size_range
            if self._random_left > 0:
                self._random_left -= 1
            return int(self.rng.integers(lo, hi + 1)), frees

    def bind(self, block_id) -> None:
        """Record that the pending scripted request was served as ``block_id``."""
        if self._pending is not None:
            self._tags[self._pending] = block_id
            self._pending = None


def make_workload(cfg: WorkloadConfig, rng: np.random.Generator) -> Workload:
    return Workload(cfg, rng)


def make_mixed(cfg: WorkloadConfig, rng: np.random.Generator) -> Workload:
    if cfg.mode != "mixed":
        raise ConfigError("workload.mode", f"make_mixed needs mode 'mixed', got {cfg.mode!r}")
    return Workload(cfg, rng)
