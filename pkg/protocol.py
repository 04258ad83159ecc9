"""
Three-party QDS protocol: key generation, sifting, test sampling, symmetrization,
signing, verification and forwarding, plus Monte-Carlo attack harnesses.

Classical channels are ideal: delivered in order, authenticated, and secret
where the key exchange requires it. Quantum transmission runs Bob -> Alice and
Charlie -> Alice.
"""
import hashlib
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from scipy.stats import binom
from tqdm import tqdm

from channel_model import (
    Basis,
    Intensity,
    Link,
    ObservedCounts,
    background_yield,
    error_fraction,
    gain,
    sample_statistics,
    total_efficiency,
)
from errors import EstimationError, InfeasibleError, PoolExhaustedError, PositionMismatchError
from security import assess, min_signature_length, signature_time_and_rate

logger = logging.getLogger(__name__)

# bit-level (per-pulse) key generation up to this many pulses, aggregate above
DESK_SCALE_MAX_PULSES = 10**8
PULSE_CHUNK = 1_000_000


class Role(IntEnum):
    ALICE = 0
    BOB = 1
    CHARLIE = 2


class Purpose(IntEnum):
    CHANNEL = 0
    TEST = 1
    SYMMETRIZE = 2
    POOL = 3
    ATTACK = 4


TRANSMITTER = {Link.BOB_ALICE: Role.BOB, Link.CHARLIE_ALICE: Role.CHARLIE}
LINK_OF = {role: link for link, role in TRANSMITTER.items()}


def stream(seed, role, purpose, *extra):
    """Independent generator per (seed, party, purpose)."""
    return np.random.default_rng([int(seed), int(role), int(purpose), *[int(x) for x in extra]])


class Phase(str, Enum):
    IDLE = "idle"
    KGP = "kgp"
    SIFTED = "sifted"
    POOL_READY = "pool_ready"
    SIGNED = "signed"
    VERIFIED = "verified"
    ABORTED = "aborted"


_TRANSITIONS = {
    Phase.IDLE: {Phase.KGP},
    Phase.KGP: {Phase.SIFTED, Phase.ABORTED},
    Phase.SIFTED: {Phase.POOL_READY, Phase.ABORTED},
    Phase.POOL_READY: {Phase.SIGNED, Phase.VERIFIED, Phase.ABORTED},
    Phase.SIGNED: {Phase.SIGNED, Phase.ABORTED},
    Phase.VERIFIED: {Phase.VERIFIED, Phase.ABORTED},
    Phase.ABORTED: set(),
}


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class MessageKind(str, Enum):
    BASIS_ANNOUNCE = "BasisAnnounce"
    SIFT_RESULT = "SiftResult"
    TEST_REVEAL = "TestReveal"
    SYMMETRIZATION_FORWARD = "SymmetrizationForward"
    SIGNATURE = "Signature"
    FORWARDED_SIGNATURE = "ForwardedSignature"
    ACCEPT = "Accept"
    REJECT = "Reject"
    ABORT = "Abort"


# ---------------------------------------------------------------- transcripts


def _canonical(value):
    """JSON-ready form of a payload; bit arrays are packed to hex."""
    if isinstance(value, np.ndarray):
        if value.dtype == bool or value.dtype == np.uint8:
            return {"bits": len(value), "hex": np.packbits(value.astype(np.uint8)).tobytes().hex()}
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {str(_canonical(k)): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if hasattr(value, "to_payload"):
        return _canonical(value.to_payload())
    return value


@dataclass(frozen=True)
class ClassicalMessage:
    kind: MessageKind
    sender: Role
    receiver: Role
    payload: dict

    def digest(self):
        text = json.dumps(_canonical(self.payload), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


class Transcript:
    def __init__(self):
        self.messages = []

    def append(self, message):
        self.messages.append(message)
        logger.debug("#%d %s %s -> %s", len(self.messages) - 1, message.kind.value,
                     message.sender.name, message.receiver.name)
        return message

    def __len__(self):
        return len(self.messages)

    def to_records(self):
        return [
            {
                "seq": seq,
                "kind": msg.kind.value,
                "sender": msg.sender.name.lower(),
                "receiver": msg.receiver.name.lower(),
                "digest": msg.digest(),
            }
            for seq, msg in enumerate(self.messages)
        ]

    def write_jsonl(self, path):
        with open(path, "w") as f:
            for record in self.to_records():
                f.write(json.dumps(record) + "\n")
        logger.info("transcript with %d messages written to %s", len(self.messages), path)

    def digest(self):
        """Fingerprint of the whole run."""
        h = hashlib.sha256()
        for record in self.to_records():
            h.update(json.dumps(record, sort_keys=True).encode())
        return h.hexdigest()


# ---------------------------------------------------------------- key pools


class KeyPool:
    """Sifted Z-basis bits shared by a transmitter and Alice, consumed front to back."""

    mode = None

    @property
    def remaining(self):
        raise NotImplementedError

    def take(self, n):
        """Next n unused bits as (transmitter bits, Alice bits)."""
        raise NotImplementedError

    def reveal_test(self, k, rng):
        """Reveal k random unused bits; returns (positions, tx bits, error count) and drops them."""
        raise NotImplementedError

    def _check(self, n):
        if n > self.remaining:
            raise PoolExhaustedError(f"requested {n} bits but only {self.remaining} remain in the {self.mode} pool")


class BitPool(KeyPool):
    mode = "bit"

    def __init__(self, tx_bits, rx_bits):
        if len(tx_bits) != len(rx_bits):
            raise ValueError("transmitter and receiver pools differ in length")
        self.tx_bits = np.asarray(tx_bits, dtype=np.uint8)
        self.rx_bits = np.asarray(rx_bits, dtype=np.uint8)
        self._cursor = 0

    @property
    def remaining(self):
        return len(self.tx_bits) - self._cursor

    def take(self, n):
        self._check(n)
        start, self._cursor = self._cursor, self._cursor + n
        return self.tx_bits[start:self._cursor].copy(), self.rx_bits[start:self._cursor].copy()

    def reveal_test(self, k, rng):
        self._check(k)
        positions = np.sort(rng.choice(self.remaining, size=k, replace=False)) + self._cursor
        tx = self.tx_bits[positions]
        errors = int(np.count_nonzero(tx != self.rx_bits[positions]))
        keep = np.ones(len(self.tx_bits), dtype=bool)
        keep[positions] = False
        self.tx_bits, self.rx_bits = self.tx_bits[keep], self.rx_bits[keep]
        return positions, tx, errors

    def qber(self):
        if len(self.tx_bits) == 0:
            return 0.0
        return float(np.mean(self.tx_bits != self.rx_bits))


class SyntheticPool(KeyPool):
    """Aggregate-mode pool: bits are synthesized on demand with the link QBER."""

    mode = "synthetic"

    def __init__(self, size, qber, rng):
        self._size = int(size)
        self.qber_value = float(qber)
        self._rng = rng

    @property
    def remaining(self):
        return self._size

    def _draw(self, n):
        tx = self._rng.integers(0, 2, n, dtype=np.uint8)
        flips = (self._rng.random(n) < self.qber_value).astype(np.uint8)
        return tx, tx ^ flips

    def take(self, n):
        self._check(n)
        self._size -= n
        return self._draw(n)

    def reveal_test(self, k, rng):
        self._check(k)
        positions = np.sort(rng.choice(self._size, size=k, replace=False))
        tx, rx = self._draw(k)
        self._size -= k
        return positions, tx, int(np.count_nonzero(tx != rx))

    def qber(self):
        return self.qber_value


# ---------------------------------------------------------------- key generation


@dataclass
class KGPResult:
    link: Link
    counts: ObservedCounts
    pool: KeyPool
    mode: str
    detections: int = 0


def _simulate_pulses(rng, pc, ch):
    """Per-pulse transmission in chunks; returns counts, Z bits and the sifting record."""
    eta, y0 = total_efficiency(ch), background_yield(ch)
    q = {i: gain(pc.intensity(i), eta, y0) for i in Intensity}
    e = {i: error_fraction(pc.intensity(i), eta, y0, ch.misalignment) for i in Intensity}
    n = {(b, i): 0 for b in Basis for i in Intensity}
    m = dict(n)
    tx_bits, rx_bits, alice_bases, keep_masks = [], [], [], []
    left = pc.n_pulses
    while left > 0:
        size = min(PULSE_CHUNK, left)
        left -= size
        sent = rng.random(size) < ch.duty_cycle
        signal = rng.random(size) < pc.p_mu
        tx_z = rng.random(size) < pc.p_z_tx
        rx_z = rng.random(size) < pc.p_z_rx
        bits = rng.integers(0, 2, size, dtype=np.uint8)
        clicked = sent & (rng.random(size) < np.where(signal, q[Intensity.SIGNAL], q[Intensity.DECOY]))
        flipped = clicked & (rng.random(size) < np.where(signal, e[Intensity.SIGNAL], e[Intensity.DECOY]))
        sifted = clicked & (tx_z == rx_z)
        alice_bases.append(rx_z[clicked])
        keep_masks.append((tx_z == rx_z)[clicked])
        for basis, bmask in ((Basis.Z, tx_z), (Basis.X, ~tx_z)):
            for intensity, imask in ((Intensity.SIGNAL, signal), (Intensity.DECOY, ~signal)):
                cell = sifted & bmask & imask
                n[(basis, intensity)] += int(np.count_nonzero(cell))
                m[(basis, intensity)] += int(np.count_nonzero(cell & flipped))
        z = sifted & tx_z
        tx_bits.append(bits[z])
        rx_bits.append(bits[z] ^ flipped[z].astype(np.uint8))
    counts = ObservedCounts.from_cells({cell: (n[cell], m[cell]) for cell in n})
    return (
        counts,
        np.concatenate(tx_bits),
        np.concatenate(rx_bits),
        np.concatenate(alice_bases),
        np.concatenate(keep_masks),
    )


def run_kgp(link, pc, ch, seed, transcript=None):
    """Key-generation protocol on one link: decoy-state QKD without error correction
    or privacy amplification. Bit-level below DESK_SCALE_MAX_PULSES, aggregate above.
    """
    tx_role = TRANSMITTER[link]
    rng = stream(seed, tx_role, Purpose.CHANNEL)
    transcript = transcript if transcript is not None else Transcript()
    if pc.n_pulses <= DESK_SCALE_MAX_PULSES:
        counts, tx_bits, rx_bits, bases, keep = _simulate_pulses(rng, pc, ch)
        transcript.append(ClassicalMessage(MessageKind.BASIS_ANNOUNCE, Role.ALICE, tx_role,
                                           {"link": link, "z_basis": bases}))
        transcript.append(ClassicalMessage(MessageKind.SIFT_RESULT, tx_role, Role.ALICE,
                                           {"link": link, "keep": keep}))
        pool = BitPool(tx_bits, rx_bits)
        detections = len(bases)
    else:
        counts = sample_statistics(pc, ch, seed=[int(seed), int(tx_role), int(Purpose.CHANNEL)])
        transcript.append(ClassicalMessage(MessageKind.BASIS_ANNOUNCE, Role.ALICE, tx_role,
                                           {"link": link, "counts": counts.model_dump()}))
        transcript.append(ClassicalMessage(MessageKind.SIFT_RESULT, tx_role, Role.ALICE,
                                           {"link": link, "pool": counts.pool_size}))
        pool = SyntheticPool(counts.pool_size, counts.error_rate(Basis.Z), stream(seed, tx_role, Purpose.POOL))
        detections = int(sum(n for _, _, n, _ in counts.cells()))
    logger.info("KGP %s (%s mode): pool %d bits, Z QBER %.4f", link.value, pool.mode,
                pool.remaining, counts.error_rate(Basis.Z))
    return KGPResult(link=link, counts=counts, pool=pool, mode=pool.mode, detections=detections)


def reveal_test_keys(kgp, k, seed, transcript):
    """Transmitter reveals k random pool bits; returns the observed error count."""
    tx_role = TRANSMITTER[kgp.link]
    positions, bits, errors = kgp.pool.reveal_test(k, stream(seed, tx_role, Purpose.TEST))
    transcript.append(ClassicalMessage(MessageKind.TEST_REVEAL, tx_role, Role.ALICE,
                                       {"link": kgp.link, "positions": positions, "bits": bits}))
    return errors


# ---------------------------------------------------------------- symmetrization and signatures


@dataclass(frozen=True)
class SymmetrizedKey:
    """A recipient's holding: half of his own key plus half forwarded by the other recipient."""

    kept_origin: Link
    kept_positions: np.ndarray
    kept_bits: np.ndarray
    forwarded_origin: Link
    forwarded_positions: np.ndarray
    forwarded_bits: np.ndarray

    def to_payload(self):
        return {
            "kept_origin": self.kept_origin,
            "kept_positions": self.kept_positions,
            "forwarded_origin": self.forwarded_origin,
            "forwarded_positions": self.forwarded_positions,
        }


@dataclass(frozen=True)
class SignatureBundle:
    message_bit: int
    k_b: np.ndarray
    k_c: np.ndarray
    slot: int = 0

    def __post_init__(self):
        if self.message_bit not in (0, 1):
            raise ValueError(f"message bit must be 0 or 1, got {self.message_bit}")
        if len(self.k_b) != len(self.k_c):
            raise ValueError("signature halves differ in length")

    @property
    def L(self):
        return len(self.k_b)

    def key_for(self, link):
        return self.k_b if link is Link.BOB_ALICE else self.k_c

    def to_payload(self):
        return {"m": self.message_bit, "slot": self.slot, "k_b": self.k_b, "k_c": self.k_c}


def symmetrize(bob_key, charlie_key, seed, slot=0, m=0):
    """Each recipient forwards a uniformly random half of his key to the other.

    Returns (S_B, S_C).
    """
    L = len(bob_key)
    if len(charlie_key) != L:
        raise ValueError("recipient keys differ in length")
    if L % 2:
        raise ValueError(f"symmetrization needs an even key length, got L={L}")
    half = L // 2
    bob_fwd = np.sort(stream(seed, Role.BOB, Purpose.SYMMETRIZE, slot, m).permutation(L)[:half])
    charlie_fwd = np.sort(stream(seed, Role.CHARLIE, Purpose.SYMMETRIZE, slot, m).permutation(L)[:half])
    bob_keep = np.setdiff1d(np.arange(L), bob_fwd)
    charlie_keep = np.setdiff1d(np.arange(L), charlie_fwd)
    s_b = SymmetrizedKey(Link.BOB_ALICE, bob_keep, bob_key[bob_keep],
                         Link.CHARLIE_ALICE, charlie_fwd, charlie_key[charlie_fwd])
    s_c = SymmetrizedKey(Link.CHARLIE_ALICE, charlie_keep, charlie_key[charlie_keep],
                         Link.BOB_ALICE, bob_fwd, bob_key[bob_fwd])
    return s_b, s_c


def _half_mismatches(key, positions, bits):
    if len(positions) != len(bits):
        raise PositionMismatchError("position and bit lists differ in length")
    if len(positions) and (positions.min() < 0 or positions.max() >= len(key)):
        raise PositionMismatchError(f"positions fall outside a signature key of length {len(key)}")
    if len(np.unique(positions)) != len(positions):
        raise PositionMismatchError("duplicate positions in symmetrized key")
    return int(np.count_nonzero(key[positions] != bits))


def count_mismatches(bundle, s_key):
    """(kept-half mismatches, forwarded-half mismatches) against the bundle's origin strings."""
    return (
        _half_mismatches(bundle.key_for(s_key.kept_origin), s_key.kept_positions, s_key.kept_bits),
        _half_mismatches(bundle.key_for(s_key.forwarded_origin), s_key.forwarded_positions, s_key.forwarded_bits),
    )


def verify(bundle, s_key, threshold, L):
    """Accept iff both halves hold strictly fewer than threshold * L / 2 mismatches."""
    if not 0.0 < threshold < 0.5:
        raise ValueError(f"threshold={threshold} must be in (0, 0.5)")
    kept, forwarded = count_mismatches(bundle, s_key)
    limit = threshold * L / 2.0
    return Verdict.ACCEPT if kept < limit and forwarded < limit else Verdict.REJECT


# ---------------------------------------------------------------- parties


class Party:
    def __init__(self, role):
        self.role = role
        self.phase = Phase.IDLE

    def advance(self, phase):
        if phase not in _TRANSITIONS[self.phase]:
            raise RuntimeError(f"{self.role.name.lower()}: illegal transition {self.phase.value} -> {phase.value}")
        logger.debug("%s: %s -> %s", self.role.name.lower(), self.phase.value, phase.value)
        self.phase = phase


class Signer(Party):
    """Alice: holds measurement-derived keys per (slot, message bit)."""

    def __init__(self):
        super().__init__(Role.ALICE)
        self.blocks = {}
        self._used = set()

    def store(self, slot, m, k_b, k_c):
        self.blocks[(slot, m)] = (k_b, k_c)

    def free_slots(self):
        return sorted({slot for slot, _ in self.blocks} - self._used)

    def sign(self, m):
        if self.phase not in (Phase.POOL_READY, Phase.SIGNED):
            raise RuntimeError(f"alice cannot sign in phase {self.phase.value}")
        free = self.free_slots()
        if not free:
            raise PoolExhaustedError("no unused signature slot left; run another distribution stage")
        slot = free[0]
        # both message blocks of the slot are burned
        self._used.add(slot)
        k_b, k_c = self.blocks[(slot, m)]
        self.advance(Phase.SIGNED)
        return SignatureBundle(message_bit=m, k_b=k_b, k_c=k_c, slot=slot)


class Recipient(Party):
    def __init__(self, role):
        super().__init__(role)
        self.keys = {}
        self.thresholds = None

    def store(self, slot, m, s_key):
        self.keys[(slot, m)] = s_key

    def check(self, bundle, forwarded):
        """Mismatches and verdict; s_alpha for a bundle from Alice, s_upsilon for a forwarded one."""
        s_key = self.keys.get((bundle.slot, bundle.message_bit))
        if s_key is None:
            raise PositionMismatchError(f"{self.role.name.lower()} holds no key for slot {bundle.slot}")
        threshold = self.thresholds.s_upsilon if forwarded else self.thresholds.s_alpha
        mismatches = count_mismatches(bundle, s_key)
        return mismatches, verify(bundle, s_key, threshold, bundle.L)


def sign(alice, m):
    return alice.sign(m)


# ---------------------------------------------------------------- messaging


@dataclass
class MessagingResult:
    message_bit: int
    bob_verdict: Verdict
    charlie_verdict: Verdict = None
    mismatches: dict = field(default_factory=dict)
    aborted: bool = False

    @property
    def accepted(self):
        return self.bob_verdict is Verdict.ACCEPT and self.charlie_verdict is Verdict.ACCEPT


def run_messaging(alice, bob, charlie, m, thresholds=None, transcript=None, tamper=None):
    """Alice -> Bob (checked at s_alpha) -> Charlie (checked at s_upsilon).

    A Bob rejection broadcasts Abort and Charlie never rules. `tamper` may rewrite
    the bundle on its way to Bob.
    """
    transcript = transcript if transcript is not None else Transcript()
    if thresholds is not None:
        bob.thresholds = charlie.thresholds = thresholds
    result = MessagingResult(message_bit=m, bob_verdict=None)
    bundle = sign(alice, m)
    if tamper is not None:
        bundle = tamper(bundle)
    queue = deque([ClassicalMessage(MessageKind.SIGNATURE, Role.ALICE, Role.BOB, {"m": m, "bundle": bundle})])
    while queue:
        msg = transcript.append(queue.popleft())
        if msg.kind is MessageKind.SIGNATURE:
            mismatches, verdict = bob.check(msg.payload["bundle"], forwarded=False)
            result.bob_verdict = verdict
            result.mismatches["bob"] = mismatches
            if verdict is Verdict.ACCEPT:
                if bob.phase is not Phase.VERIFIED:
                    bob.advance(Phase.VERIFIED)
                queue.append(ClassicalMessage(MessageKind.ACCEPT, Role.BOB, Role.ALICE, {"m": m}))
                queue.append(ClassicalMessage(MessageKind.FORWARDED_SIGNATURE, Role.BOB, Role.CHARLIE, msg.payload))
            else:
                queue.append(ClassicalMessage(MessageKind.REJECT, Role.BOB, Role.ALICE, {"m": m}))
                for receiver in (Role.ALICE, Role.CHARLIE):
                    queue.append(ClassicalMessage(MessageKind.ABORT, Role.BOB, receiver, {"m": m}))
        elif msg.kind is MessageKind.FORWARDED_SIGNATURE:
            mismatches, verdict = charlie.check(msg.payload["bundle"], forwarded=True)
            result.charlie_verdict = verdict
            result.mismatches["charlie"] = mismatches
            if verdict is Verdict.ACCEPT and charlie.phase is not Phase.VERIFIED:
                charlie.advance(Phase.VERIFIED)
            kind = MessageKind.ACCEPT if verdict is Verdict.ACCEPT else MessageKind.REJECT
            queue.append(ClassicalMessage(kind, Role.CHARLIE, Role.BOB, {"m": m}))
        elif msg.kind is MessageKind.ABORT:
            party = alice if msg.receiver is Role.ALICE else charlie
            party.advance(Phase.ABORTED)
            if bob.phase is not Phase.ABORTED:
                bob.advance(Phase.ABORTED)
            result.aborted = True
    logger.info("message %d: bob %s, charlie %s", m, result.bob_verdict.value,
                result.charlie_verdict.value if result.charlie_verdict else "-")
    return result


# ---------------------------------------------------------------- session


@dataclass
class DistributionResult:
    L: int
    k: int
    slots: int
    thresholds: object
    report: object
    mode: str
    kgp: dict
    notes: list = field(default_factory=list)


class QDSSession:
    """Distribution for any number of one-bit slots, then messaging per slot."""

    def __init__(self, pc, ch, params, seed):
        self.pc, self.ch, self.params, self.seed = pc, ch, params, int(seed)
        self.transcript = Transcript()
        self.alice = Signer()
        self.bob = Recipient(Role.BOB)
        self.charlie = Recipient(Role.CHARLIE)
        self.distribution = None

    @property
    def parties(self):
        return (self.alice, self.bob, self.charlie)

    def distribute(self, L=None, slots=1, thresholds=None):
        """KGP on both links, L solved from the sampled counts unless given, test keys
        revealed, then 2L bits per link per slot symmetrized.
        """
        if slots < 1:
            raise ValueError(f"slots={slots} must be at least 1")
        for party in self.parties:
            party.advance(Phase.KGP)
        kgp = {link: run_kgp(link, self.pc, self.ch, self.seed, self.transcript) for link in Link}
        for party in self.parties:
            party.advance(Phase.SIFTED)
        counts = {link: result.counts for link, result in kgp.items()}
        if L is None:
            L = min_signature_length(counts, self.pc, self.params)
        if L < 2 or L % 2:
            raise ValueError(f"signature length L={L} must be even and at least 2")
        k = self.params.test_keys(L)
        test_errors = [reveal_test_keys(kgp[link], k, self.seed, self.transcript) for link in Link]
        needed = 2 * L * slots
        for link, result in kgp.items():
            if result.pool.remaining < needed:
                for party in self.parties:
                    party.advance(Phase.ABORTED)
                raise PoolExhaustedError(
                    f"{link.value} pool holds {result.pool.remaining} bits after testing; "
                    f"{slots} slot(s) of L={L} need {needed}"
                )
        notes = []
        try:
            report = assess(counts, self.pc, self.params.model_copy(update={"k_test": k}), L,
                            test_errors=test_errors)
            report.with_timing(signature_time_and_rate(L, counts, self.pc, self.ch))
        except EstimationError as exc:
            if thresholds is None:
                raise
            report = None
            notes.append(f"no block estimate at L={L} ({exc}); using the supplied thresholds")
            logger.warning(notes[-1])
        if thresholds is None:
            if not report.thresholds.feasible:
                raise InfeasibleError(
                    f"thresholds infeasible at L={L}: p_E={report.p_e:.4g}, E^U={report.e_upper:.4g}"
                )
            thresholds = report.thresholds
        self.bob.thresholds = self.charlie.thresholds = thresholds
        for slot in range(slots):
            for m in (0, 1):
                bob_tx, alice_b = kgp[Link.BOB_ALICE].pool.take(L)
                charlie_tx, alice_c = kgp[Link.CHARLIE_ALICE].pool.take(L)
                self.alice.store(slot, m, alice_b, alice_c)
                s_b, s_c = symmetrize(bob_tx, charlie_tx, self.seed, slot=slot, m=m)
                self.bob.store(slot, m, s_b)
                self.charlie.store(slot, m, s_c)
                self.transcript.append(ClassicalMessage(MessageKind.SYMMETRIZATION_FORWARD, Role.BOB, Role.CHARLIE,
                                                        {"slot": slot, "m": m, "positions": s_c.forwarded_positions,
                                                         "bits": s_c.forwarded_bits}))
                self.transcript.append(ClassicalMessage(MessageKind.SYMMETRIZATION_FORWARD, Role.CHARLIE, Role.BOB,
                                                        {"slot": slot, "m": m, "positions": s_b.forwarded_positions,
                                                         "bits": s_b.forwarded_bits}))
        for party in self.parties:
            party.advance(Phase.POOL_READY)
        self.distribution = DistributionResult(
            L=L, k=k, slots=slots, thresholds=thresholds, report=report,
            mode=kgp[Link.BOB_ALICE].mode, kgp=kgp, notes=notes,
        )
        return self.distribution

    def run_messaging(self, m, tamper=None):
        if self.distribution is None:
            raise RuntimeError("distribution stage has not run")
        return run_messaging(self.alice, self.bob, self.charlie, m, transcript=self.transcript, tamper=tamper)


# ---------------------------------------------------------------- attack harness


@dataclass(frozen=True)
class AttackResult:
    trials: int
    successes: int

    @property
    def rate(self):
        return self.successes / self.trials if self.trials else 0.0

    @property
    def stderr(self):
        p = self.rate
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.trials) if self.trials else 0.0


def attack_repudiation(trials, L, th, corruption_rate, seed, honest_error=0.0, progress=False):
    """Alice flips a fixed fraction of K^B before symmetrization is known and wins when
    Bob accepts at s_alpha but Charlie rejects the forwarded bundle at s_upsilon.
    """
    if L % 2:
        raise ValueError(f"L={L} must be even")
    rng = stream(seed, Role.ALICE, Purpose.ATTACK)
    half = L // 2
    corrupted = int(round(corruption_rate * L))
    wins = 0
    for start in tqdm(range(0, trials, 10_000), desc="repudiation", disable=not progress):
        size = min(10_000, trials - start)
        # corrupted positions landing in Bob's kept half of K^B
        bob_bad = rng.hypergeometric(corrupted, L - corrupted, half, size=size)
        charlie_bad = corrupted - bob_bad
        bob_b = bob_bad + rng.binomial(half - bob_bad, honest_error)
        charlie_b = charlie_bad + rng.binomial(half - charlie_bad, honest_error)
        bob_c = rng.binomial(half, honest_error, size=size)
        charlie_c = rng.binomial(half, honest_error, size=size)
        bob_ok = (bob_b < th.s_alpha * half) & (bob_c < th.s_alpha * half)
        charlie_ok = (charlie_b < th.s_upsilon * half) & (charlie_c < th.s_upsilon * half)
        wins += int(np.count_nonzero(bob_ok & ~charlie_ok))
    return AttackResult(trials=trials, successes=wins)


def forge_success_probability(L, s_upsilon):
    """Exact chance that L/2 uniform guesses land strictly under s_upsilon * L / 2 mismatches."""
    half = L // 2
    limit = math.ceil(s_upsilon * half) - 1
    if limit < 0:
        return 0.0
    return float(binom.cdf(limit, half, 0.5))


def attack_forge(trials, L, th, seed, progress=False):
    """Bob fabricates K^C for Charlie: the half Charlie forwarded to him is copied, the
    half Charlie kept is guessed uniformly.
    """
    if L % 2:
        raise ValueError(f"L={L} must be even")
    rng = stream(seed, Role.BOB, Purpose.ATTACK)
    half = L // 2
    wins = 0
    for start in tqdm(range(0, trials, 10_000), desc="forging", disable=not progress):
        size = min(10_000, trials - start)
        hidden = rng.integers(0, 2, (size, half), dtype=np.uint8)
        guess = rng.integers(0, 2, (size, half), dtype=np.uint8)
        mismatches = np.count_nonzero(hidden != guess, axis=1)
        wins += int(np.count_nonzero(mismatches < th.s_upsilon * half))
    return AttackResult(trials=trials, successes=wins)
