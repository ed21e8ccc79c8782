"""Pure-Python SIC kernel, used when the compiled extension is unavailable."""

import numpy as np


def decode_blocks(slots, offsets, n_slots, credit, required, max_iterations):
    """Iterative interference cancellation over independent blocks.

    ``slots[p]`` holds the slot indices of packet ``p``; block ``b`` owns
    packets ``offsets[b]:offsets[b+1]``. A still-undecoded packet is decodable
    when the credits of its bursts reach ``required``, where a burst sharing
    its slot with ``m - 1`` other undecoded bursts earns ``credit[m - 1]``
    (zero beyond the table). All decodable packets of a round are cancelled
    together. ``max_iterations <= 0`` runs to the fixpoint.
    """
    slots = np.asarray(slots).tolist()
    offsets = np.asarray(offsets).tolist()
    credit = list(credit)
    n_credit = len(credit)
    n_blocks = len(offsets) - 1
    decoded = np.zeros(len(slots), dtype=np.uint8)
    iterations = np.zeros(n_blocks, dtype=np.int32)
    for b in range(n_blocks):
        lo, hi = offsets[b], offsets[b + 1]
        count = [0] * n_slots
        for p in range(lo, hi):
            for s in slots[p]:
                count[s] += 1
        pending = list(range(lo, hi))
        rounds = 0
        while pending and (max_iterations <= 0 or rounds < max_iterations):
            ready = []
            rest = []
            for p in pending:
                total = 0
                for s in slots[p]:
                    m = count[s]
                    if m <= n_credit:
                        total += credit[m - 1]
                (ready if total >= required else rest).append(p)
            if not ready:
                break
            rounds += 1
            for p in ready:
                decoded[p] = 1
                for s in slots[p]:
                    count[s] -= 1
            pending = rest
        iterations[b] = rounds
    return decoded, iterations
