import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

## SolverBase class and helper functions ##

# Base class for every solver-side failure. The command line maps these to exit code 3.
class SolverException(Exception):
    pass

# Base class from which the VME and DNS drivers are derived.
class SolverBase():
    '''Construct a solver, pass the run_config object that provides general configuration for the solver.'''
    def __init__(self, id, run_config):
        self._run_config = run_config
        self._id = id

    '''Virtual function defining what a solve should look like.'''
    def solve(self, problem):
        #A solver advances its problem to the end time and returns a results.RunResult.
        raise NotImplementedError

    @property
    def id(self):
        return self._id

    @property
    def verbose(self):
        return getattr(self._run_config, "verbose", False)

    def info(self, message):
        if self.verbose: print(f'{self._id}: {message}')

    def warn(self, message):
        print(f'WARNING: {self._id}: {message}', file=sys.stderr)

def vme_home():
    '''Return $VME_HOME if it is set, otherwise the directory holding this file.'''
    _homedir = os.getenv("VME_HOME")
    if (_homedir is None):
        _homedir = os.path.dirname(os.path.realpath(__file__))
    return _homedir

def absolute_path(path, anchor=None):
    '''Takes a path and returns the absolute path. Relative paths are anchored at the given directory (default: the current working directory) unless the string starts with $VME_HOME, in which case the repository location is used.'''
    if os.path.isabs(path):
        return path
    if (path.startswith("$VME_HOME")):
        return path.replace("$VME_HOME", vme_home())
    return os.path.join(anchor if anchor is not None else os.getcwd(), path)

def subdomain_chunks(n_es, workers):
    '''Split the subdomain ids into at most `workers` contiguous chunks, in order.'''
    workers = max(1, min(int(workers), n_es))
    return [c for c in np.array_split(np.arange(n_es), workers) if len(c) > 0]

def map_subdomains(fn, n_es, workers):
    '''Run fn(ids) over contiguous subdomain chunks and return the results in chunk order.

    Each subdomain's result depends only on its own data, so the combined output does not depend on the worker count.'''
    chunks = subdomain_chunks(n_es, workers)
    if len(chunks) == 1:
        return [fn(chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return list(pool.map(fn, chunks))
