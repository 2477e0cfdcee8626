import numpy as np

from enum import IntEnum


class Purpose(IntEnum):
    """
    Registry of top-level stream ids.

    Every random quantity in a run draws from `RngStream(root).child(purpose,
    ...)`, so adding a consumer never shifts the bits of another one.
    """

    GRAPH = 1
    EDGE_STATS = 2
    OPT = 3
    SAMPLER = 4
    TRIAL = 5
    REALIZATION = 6
    VIMATCH = 7
    Z_ESTIMATE = 8
    Z_DROP = 9
    EVALUATION = 10
    CONSTRUCT_H = 11


class RngStream:
    """
    A named, splittable random stream.

    A stream is identified by a 64-bit root seed and a path of stream ids.
    Streams with distinct paths are statistically independent, and the same
    (root, path) always yields the same bits. Generators are numpy's
    counter-based Philox keyed by a `SeedSequence`.
    """

    def __init__(self, root_seed: int, path: tuple[int, ...] = ()) -> None:
        if root_seed < 0 or root_seed >= 2**64:
            raise ValueError(f"Root seed must fit in 64 bits: {root_seed}")
        self.root_seed = root_seed
        self.path = path

    def child(self, *ids: int) -> "RngStream":
        for i in ids:
            if i < 0:
                raise ValueError(f"Stream ids must be nonnegative: {i}")
        return RngStream(self.root_seed, self.path + tuple(int(i) for i in ids))

    def for_purpose(self, purpose: Purpose, *ids: int) -> "RngStream":
        return self.child(int(purpose), *ids)

    @property
    def seed(self) -> int:
        """
        The 64-bit seed this stream reduces to.
        """
        sequence = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        return int(sequence.generate_state(1, dtype=np.uint64)[0])

    def generator(self) -> np.random.Generator:
        return generator_from_seed(self.seed)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RngStream):
            return NotImplemented
        return self.root_seed == other.root_seed and self.path == other.path

    def __hash__(self) -> int:
        return hash((self.root_seed, self.path))

    def __repr__(self) -> str:
        return f"RngStream({self.root_seed}, {self.path})"


def generator_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))
