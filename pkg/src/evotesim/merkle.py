"""Merkle tree over the registered-commitment set.

Leaves are the 32-byte commitments in canonical (sorted) order, not arrival
order: replicas that gossip transactions see different interleavings, and the
root must be a pure function of the commitment *set* or replicas would freeze
different roots. Odd levels duplicate their last node. Leaf and interior
hashes carry distinct domain tags, which blocks the classic proof-forgery
tricks that treat an interior node as a leaf.
"""

from __future__ import annotations

from .hashing import DIGEST_LEN, merkle_leaf, merkle_node

# Root of the empty set. No commitment can prove membership against it.
EMPTY_ROOT = bytes(DIGEST_LEN)

# A path step is (sibling_hash, side): side 0 means the running node is the
# left child, side 1 means it is the right child.
PathStep = tuple[bytes, int]


class MerkleTree:
    """Immutable tree built from a set of 32-byte commitments."""

    def __init__(self, commitments):
        leaves = sorted(set(commitments))
        if any(len(cm) != DIGEST_LEN for cm in leaves):
            raise ValueError("commitments must be 32 bytes")
        self.leaves: list[bytes] = leaves
        self._levels: list[list[bytes]] = []
        if leaves:
            level = [merkle_leaf(cm) for cm in leaves]
            self._levels.append(level)
            while len(level) > 1:
                if len(level) % 2:
                    level = level + [level[-1]]
                    self._levels[-1] = level
                level = [
                    merkle_node(level[i], level[i + 1])
                    for i in range(0, len(level), 2)
                ]
                self._levels.append(level)

    @property
    def root(self) -> bytes:
        if not self._levels:
            return EMPTY_ROOT
        return self._levels[-1][0]

    def __len__(self) -> int:
        return len(self.leaves)

    def __contains__(self, cm: bytes) -> bool:
        return cm in set(self.leaves)

    def path(self, cm: bytes) -> list[PathStep]:
        """Membership path for cm; raises KeyError if cm is not a leaf."""
        try:
            index = self.leaves.index(cm)
        except ValueError:
            raise KeyError("commitment not in tree") from None
        steps: list[PathStep] = []
        for level in self._levels[:-1]:
            if index % 2 == 0:
                steps.append((level[index + 1], 0))
            else:
                steps.append((level[index - 1], 1))
            index //= 2
        return steps


def fold_path(cm: bytes, steps: list[PathStep]) -> bytes:
    """Recompute the root a path claims; membership holds iff it matches."""
    node = merkle_leaf(cm)
    for sibling, side in steps:
        if side == 0:
            node = merkle_node(node, sibling)
        else:
            node = merkle_node(sibling, node)
    return node
