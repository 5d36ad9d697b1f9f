"""Event-driven simulation of the fragmentation chain stopped at a threshold.

A block of mass m waits Exp(1) / (m^alpha * rate), then splits by an
independent draw from the dislocation law scaled by m.  Children of mass
<= eta fall through the sieve and are frozen; children above it recurse.
Every random draw is keyed by the block's lineage (see `rng`), so the jump
tree -- the set of (parent mass, child masses) tuples and the frozen state --
is identical for every alpha and for any batching of replicas; only event
times change with alpha.

Tie convention: a block of mass exactly eta does NOT fragment further.  For
continuous families ties have probability zero; for lattice families
(dirac_binary at dyadic eta) this pins the enumerated regression trees.

Replicas are simulated in batches, wave by wave (one wave = one tree depth
across the whole batch), which keeps the hot loop in vectorised numpy.
Masses are stored as linear 64-bit floats, adequate for thresholds at desk
scale (eta >= 1e-6).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import BudgetExceeded, DomainError, IncompleteHorizon
from .measures import DislocationModel, MassSplit
from .rng import Stream, derive_vec, draw_vec, mix, to_unit_vec

DEFAULT_EVENT_BUDGET = 10**8

# draw tags within a block's stream
_T_TIME = 0
_T_SPLIT = 1
# sub-stream tags for children
_C_FIRST = 0
_C_SECOND = 1


@dataclass
class EventLog:
    """Split events of one path, in depth-major (breadth-first) order.

    Column arrays share a common length; child fractions are relative to the
    parent, with frac2 = 0 marking a single-child split.  Block ids are dense:
    root 0, children numbered in event order.
    """

    times: np.ndarray
    parent_ids: np.ndarray
    parent_masses: np.ndarray
    frac1: np.ndarray
    frac2: np.ndarray
    child1_ids: np.ndarray
    child2_ids: np.ndarray
    model_config: dict
    alpha: float
    eta: float
    seed: int
    n_blocks: int
    truncated: bool = False
    _blocks: tuple | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dissipated(self) -> np.ndarray:
        return self.parent_masses * (1.0 - self.frac1 - self.frac2)

    def _block_table(self):
        # mass / birth / death per block id; death = +inf for leaves
        if self._blocks is None:
            n = self.n_blocks
            mass = np.empty(n)
            birth = np.zeros(n)
            death = np.full(n, np.inf)
            mass[0] = 1.0
            c1, c2 = self.child1_ids, self.child2_ids
            mass[c1] = self.parent_masses * self.frac1
            birth[c1] = self.times
            has2 = c2 >= 0
            mass[c2[has2]] = (self.parent_masses * self.frac2)[has2]
            birth[c2[has2]] = self.times[has2]
            death[self.parent_ids] = self.times
            self._blocks = (mass, birth, death)
        return self._blocks


@dataclass
class StoppedState:
    """Frozen stopping-line blocks: first blocks of mass <= eta per lineage."""

    masses: np.ndarray
    keys: np.ndarray
    birth_times: np.ndarray
    block_ids: np.ndarray
    eta: float
    model_config: dict
    alpha: float
    seed: int
    dissipated_total: float
    n_blocks: int
    truncated: bool = False

    @property
    def lambdas(self) -> np.ndarray:
        """Frozen masses, nonincreasing."""
        return np.sort(self.masses)[::-1]

    def __len__(self) -> int:
        return len(self.masses)


class _BatchState(NamedTuple):
    keys: np.ndarray
    masses: np.ndarray
    births: np.ndarray
    ids: np.ndarray
    reps: np.ndarray


def _simulate_batch(model: DislocationModel, alpha: float, eta: float,
                    root: _BatchState, n_rep: int,
                    event_budget: int, next_id: np.ndarray,
                    start_counts: np.ndarray):
    """Wave loop shared by fresh and resumed simulations."""
    rate = model.total_rate
    ev_cols = {k: [] for k in ("time", "pid", "pm", "f1", "f2",
                               "c1", "c2", "rep")}
    fz_cols = {k: [] for k in ("mass", "key", "birth", "id", "rep")}
    ev_count = start_counts.astype(np.int64).copy()
    diss = np.zeros(n_rep)
    truncated = np.zeros(n_rep, dtype=bool)

    keys, masses, births, ids, reps = root
    while keys.size:
        u_time = to_unit_vec(draw_vec(keys, _T_TIME))
        waits = -np.log(u_time) / (rate * masses**alpha)
        times = births + waits
        u_split = to_unit_vec(draw_vec(keys, _T_SPLIT))
        s1, s2 = model.fractions_from_uniform(u_split)
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        c1m = masses * s1
        c2m = masses * s2

        ev_cols["time"].append(times)
        ev_cols["pid"].append(ids)
        ev_cols["pm"].append(masses)
        ev_cols["f1"].append(s1)
        ev_cols["f2"].append(s2)
        ev_cols["rep"].append(reps)
        np.add.at(diss, reps, masses - c1m - c2m)

        wave_ev = np.bincount(reps, minlength=n_rep)
        ev_count += wave_ev

        # children, parent-major: [p1c1, p1c2, p2c1, p2c2, ...]
        two = s2 > 0.0
        n_par = keys.size
        ck = np.empty((n_par, 2), dtype=np.uint64)
        ck[:, 0] = derive_vec(keys, _C_FIRST)
        ck[:, 1] = derive_vec(keys, _C_SECOND)
        cm = np.column_stack([c1m, c2m])
        crep = np.repeat(reps, 2).reshape(n_par, 2)
        cbirth = np.repeat(times, 2).reshape(n_par, 2)
        keep = np.ones((n_par, 2), dtype=bool)
        keep[:, 1] = two

        flat_keep = keep.ravel()
        ck = ck.ravel()[flat_keep]
        cm = cm.ravel()[flat_keep]
        crep = crep.ravel()[flat_keep]
        cbirth = cbirth.ravel()[flat_keep]

        # dense per-replica ids, assigned in wave order (reps nondecreasing)
        counts = np.bincount(crep, minlength=n_rep)
        first = np.concatenate([[0], np.cumsum(counts)[:-1]])
        within = np.arange(crep.size) - first[crep]
        cid = (next_id[crep] + within).astype(np.int64)
        next_id += counts

        cid_pairs = np.full((n_par, 2), -1, dtype=np.int64)
        cid_pairs.ravel()[flat_keep] = cid
        ev_cols["c1"].append(cid_pairs[:, 0])
        ev_cols["c2"].append(cid_pairs[:, 1])

        truncated |= ev_count > event_budget
        drop = truncated[crep]
        frozen = cm <= eta
        fz = frozen & ~drop
        for col, arr in (("mass", cm), ("key", ck), ("birth", cbirth),
                         ("id", cid), ("rep", crep)):
            fz_cols[col].append(arr[fz])
        live = ~frozen & ~drop
        keys, masses, births, ids, reps = (
            ck[live], cm[live], cbirth[live], cid[live], crep[live])

    def _cat(cols, dtypes):
        return {k: (np.concatenate(v) if v else np.empty(0, dtype=dtypes[k]))
                for k, v in cols.items()}

    ev = _cat(ev_cols, {"time": float, "pid": np.int64, "pm": float,
                        "f1": float, "f2": float, "c1": np.int64,
                        "c2": np.int64, "rep": np.int64})
    fz = _cat(fz_cols, {"mass": float, "key": np.uint64, "birth": float,
                        "id": np.int64, "rep": np.int64})
    return ev, fz, diss, truncated, next_id


def _split_by_rep(arrs: dict, reps: np.ndarray, n_rep: int) -> list[dict]:
    order = np.argsort(reps, kind="stable")
    sorted_reps = reps[order]
    bounds = np.searchsorted(sorted_reps, np.arange(n_rep + 1))
    out = []
    for r in range(n_rep):
        sl = order[bounds[r]:bounds[r + 1]]
        out.append({k: v[sl] for k, v in arrs.items()})
    return out


def simulate_stopped_batch(model: DislocationModel, alpha: float, eta: float,
                           seeds, event_budget: int = DEFAULT_EVENT_BUDGET,
                           ) -> list[tuple[EventLog, StoppedState]]:
    """Simulate independent paths for the given seeds in one vectorised run.

    Results are bit-identical to running each seed on its own: all draws are
    keyed by (seed, lineage), never by batch position.
    """
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must be in (0, 1], got {eta}")
    seeds = [int(s) for s in np.atleast_1d(seeds)]
    n_rep = len(seeds)
    root_keys = np.array([mix(s) for s in seeds], dtype=np.uint64)
    root = _BatchState(root_keys, np.ones(n_rep), np.zeros(n_rep),
                       np.zeros(n_rep, dtype=np.int64),
                       np.arange(n_rep, dtype=np.int64))
    next_id = np.ones(n_rep, dtype=np.int64)  # root took id 0

    if eta >= 1.0:
        # degenerate sieve: the unit root itself falls through
        out = []
        cfg = model.to_config()
        for r, s in enumerate(seeds):
            log = _empty_log(cfg, alpha, eta, s, 1)
            state = StoppedState(np.ones(1), root_keys[r:r + 1].copy(),
                                 np.zeros(1), np.zeros(1, dtype=np.int64),
                                 eta, cfg, alpha, s, 0.0, 1)
            out.append((log, state))
        return out

    ev, fz, diss, truncated, next_id = _simulate_batch(
        model, alpha, eta, root, n_rep, event_budget, next_id,
        np.zeros(n_rep, dtype=np.int64))

    ev_split = _split_by_rep(ev, ev["rep"], n_rep)
    fz_split = _split_by_rep(fz, fz["rep"], n_rep)
    cfg = model.to_config()
    out = []
    for r, s in enumerate(seeds):
        e, z = ev_split[r], fz_split[r]
        log = EventLog(e["time"], e["pid"], e["pm"], e["f1"], e["f2"],
                       e["c1"], e["c2"], cfg, alpha, eta, s,
                       int(next_id[r]), bool(truncated[r]))
        state = StoppedState(z["mass"], z["key"], z["birth"], z["id"],
                             eta, cfg, alpha, s, float(diss[r]),
                             int(next_id[r]), bool(truncated[r]))
        out.append((log, state))
    return out


def _empty_log(cfg, alpha, eta, seed, n_blocks):
    z = np.empty(0)
    zi = np.empty(0, dtype=np.int64)
    return EventLog(z, zi, z.copy(), z.copy(), z.copy(), zi.copy(),
                    zi.copy(), cfg, alpha, eta, seed, n_blocks)


def simulate_stopped(model: DislocationModel, alpha: float, eta: float,
                     seed: int, event_budget: int = DEFAULT_EVENT_BUDGET,
                     ) -> tuple[EventLog, StoppedState]:
    """Single path; raises BudgetExceeded instead of flagging."""
    (log, state), = simulate_stopped_batch(model, alpha, eta, [seed],
                                           event_budget=event_budget)
    if log.truncated:
        raise BudgetExceeded(
            f"path exceeded event budget {event_budget} before reaching "
            f"eta={eta}")
    return log, state


def continue_stopped(model: DislocationModel, state: StoppedState,
                     eta_new: float,
                     event_budget: int = DEFAULT_EVENT_BUDGET,
                     ) -> tuple[EventLog, StoppedState]:
    """Resume a frozen state down to a finer threshold.

    Per-branch streams are lineage-keyed, so the union of the original and
    resumed runs reproduces a direct simulation at eta_new exactly (same
    masses, keys and times; block ids are freshly numbered).  The returned
    log holds only the new events.
    """
    if eta_new >= state.eta:
        raise DomainError(
            f"eta_new={eta_new} must refine the frozen threshold {state.eta}")
    if model.to_config() != state.model_config:
        raise DomainError("model does not match the frozen state")
    wake = state.masses > eta_new
    root = _BatchState(state.keys[wake], state.masses[wake],
                       state.birth_times[wake],
                       state.block_ids[wake],
                       np.zeros(int(wake.sum()), dtype=np.int64))
    next_id = np.array([state.n_blocks], dtype=np.int64)
    ev, fz, diss, truncated, next_id = _simulate_batch(
        model, state.alpha, eta_new, root, 1, event_budget, next_id,
        np.zeros(1, dtype=np.int64))
    if truncated[0]:
        raise BudgetExceeded(f"resume exceeded event budget {event_budget}")
    log = EventLog(ev["time"], ev["pid"], ev["pm"], ev["f1"], ev["f2"],
                   ev["c1"], ev["c2"], state.model_config, state.alpha,
                   eta_new, state.seed, int(next_id[0]))
    new_state = StoppedState(
        np.concatenate([state.masses[~wake], fz["mass"]]),
        np.concatenate([state.keys[~wake], fz["key"]]),
        np.concatenate([state.birth_times[~wake], fz["birth"]]),
        np.concatenate([state.block_ids[~wake], fz["id"]]),
        eta_new, state.model_config, state.alpha, state.seed,
        state.dissipated_total + float(diss[0]), int(next_id[0]))
    return log, new_state


def stopping_line(log: EventLog, eta: float) -> np.ndarray:
    """Frozen masses of the eta-stopping line, extracted from a deeper log.

    Nested lines come for free: a child is on the line iff its mass is <= eta
    while its parent's is above.
    """
    if eta < log.eta:
        raise IncompleteHorizon(
            f"log stopped at eta={log.eta}, cannot extract line at {eta}")
    if len(log) == 0:
        return np.ones(1)  # unit root fell through the sieve (eta >= 1)
    pm = log.parent_masses
    sel = pm > eta
    out = []
    for frac in (log.frac1, log.frac2):
        cm = pm[sel] * frac[sel]
        out.append(cm[(cm > 0.0) & (cm <= eta)])
    masses = np.concatenate(out) if out else np.empty(0)
    return np.sort(masses)[::-1]


def blocks_at(log: EventLog, t: float) -> np.ndarray:
    """Masses of all blocks alive at time t in the stopped process.

    Frozen blocks report their frozen mass from their birth onwards.
    """
    if t < 0.0:
        raise DomainError(f"t must be nonnegative, got {t}")
    if log.truncated:
        raise IncompleteHorizon("log was truncated by the event budget")
    mass, birth, death = log._block_table()
    alive = (birth <= t) & (death > t)
    return mass[alive]


def first_passage_sigma(log: EventLog, eta: float) -> float:
    """First time the largest live block drops to or below eta."""
    if eta < log.eta:
        raise IncompleteHorizon(
            f"log stopped at eta={log.eta} > requested {eta}")
    if log.truncated:
        raise IncompleteHorizon("log was truncated by the event budget")
    sel = log.parent_masses > eta
    if not sel.any():
        return 0.0
    return float(log.times[sel].max())


class TaggedStep(NamedTuple):
    time: float
    mass: float
    weight: float
    parent_mass: float
    fractions: tuple[float, ...]
    chosen: int  # index into fractions; -1 if the tagged line was killed


@dataclass
class TaggedPath:
    """One size-biased distinguished fragment under the untilted law.

    At each split the tagged line follows child k with probability s_k and is
    killed with probability 1 - sum(s_k) (the dissipated fraction).  `weight`
    is mass^p_star, the tilting weight that turns path averages into
    p*-weighted many-to-one expectations.
    """

    steps: list[TaggedStep]
    killed: bool
    horizon: float
    final_mass: float
    p_star: float

    def __iter__(self) -> Iterator[TaggedStep]:
        return iter(self.steps)

    @property
    def final_weight(self) -> float:
        return 0.0 if self.killed else self.final_mass ** self.p_star


def tagged_fragment_path(model: DislocationModel, horizon: float, seed: int,
                         alpha: float = 0.0, p_star: float = 0.0,
                         rng: Stream | None = None) -> TaggedPath:
    if alpha != 0.0:
        raise DomainError("tagged fragment paths require the homogeneous case")
    s = rng if rng is not None else Stream(seed)
    rate = model.total_rate
    t, mass = 0.0, 1.0
    steps: list[TaggedStep] = []
    killed = False
    while True:
        t += -math.log(s.uniform()) / rate
        if t > horizon:
            break
        split = model.sample_split(s)
        u = s.uniform()
        acc, chosen = 0.0, -1
        for k, frac in enumerate(split):
            acc += frac
            if u < acc:
                chosen = k
                break
        parent = mass
        if chosen < 0:
            killed = True
            mass = 0.0
            steps.append(TaggedStep(t, 0.0, 0.0, parent,
                                    tuple(split), -1))
            break
        mass = parent * split.masses[chosen]
        steps.append(TaggedStep(t, mass, mass ** p_star, parent,
                                tuple(split), chosen))
    return TaggedPath(steps, killed, horizon, mass, p_star)


# -- serialisation -----------------------------------------------------------


def events_to_jsonl(log: EventLog, path: str) -> None:
    with open(path, "w") as fh:
        for i in range(len(log)):
            pm = float(log.parent_masses[i])
            children = [pm * float(log.frac1[i])]
            if log.frac2[i] > 0.0:
                children.append(pm * float(log.frac2[i]))
            rec = {
                "time": float(log.times[i]),
                "parent_id": int(log.parent_ids[i]),
                "parent_mass": pm,
                "child_masses": children,
                "dissipated": pm - math.fsum(children),
            }
            fh.write(json.dumps(rec) + "\n")


def state_to_csv(state: StoppedState, path: str) -> None:
    lam = state.lambdas
    with open(path, "w") as fh:
        fh.write("k,lambda_k\n")
        for k, m in enumerate(lam, start=1):
            fh.write(f"{k},{float(m)!r}\n")
