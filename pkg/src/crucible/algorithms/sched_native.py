"""Native schedulers that keep state across decisions."""


class FairScheduler:
    """Gives each free executor to the job currently holding the fewest executors."""

    def reset(self):
        pass

    def __call__(self, candidates, executor):
        return min(range(len(candidates)),
                   key=lambda i: (candidates[i].job_executors, candidates[i].job_arrival,
                                  candidates[i].job_id, candidates[i].stage_id))


class RoundRobinScheduler:
    """Cycles through active jobs in id order, one task per turn."""

    def __init__(self):
        self.last_job = -1

    def reset(self):
        self.last_job = -1

    def __call__(self, candidates, executor):
        ids = sorted({c.job_id for c in candidates})
        nxt = next((j for j in ids if j > self.last_job), ids[0])
        self.last_job = nxt
        return next(i for i, c in enumerate(candidates) if c.job_id == nxt)
