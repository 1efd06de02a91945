# coding: utf8

from threading import Lock


class StatsCollector(object):
    '''
    Collects simple run statistics: trajectories integrated, samples lost,
    columns renormalised, boundary reflections and wraps.  Workers tally
    from several threads, so every update takes the lock.
    '''

    def __init__(self):
        self.current = {}
        self.lock = Lock()

    def tally(self, key, count=1):
        with self.lock:
            if key not in self.current:
                self.current[key] = count
            else:
                self.current[key] += count

    def getCount(self, key):
        with self.lock:
            return self.current.get(key, 0)

    def merge(self, other):
        for key, value in other.getSummary().items():
            self.tally(key, value)

    def getSummary(self):
        with self.lock:
            return dict(sorted(self.current.items()))
