"""Exception types shared across the toolkit."""


class ExplosionCapError(RuntimeError):
    """A growing tree exceeded its node budget.

    Carries the generation that blew the cap so runaway supercritical
    configurations fail loudly instead of exhausting memory.
    """

    def __init__(self, generation, count, cap, replication=None):
        self.generation = generation
        self.count = count
        self.cap = cap
        self.replication = replication
        where = f" (replication {replication})" if replication is not None else ""
        super().__init__(
            f"explosion cap: generation {generation}{where} reached "
            f"{count} nodes, cap is {cap}"
        )


class ExactRegimeExceededError(ValueError):
    """An exact computation was requested beyond its configured size limit."""


class ContractionError(ValueError):
    """An operation requiring mean generation weight < 1 was called outside it."""
