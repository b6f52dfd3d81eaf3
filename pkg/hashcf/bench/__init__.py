from .distance import BenchResult, bench_distance, reference_checksums, verify_kernels, write_bench_results
from .convergence import (
    ConvergenceRun, ConvergenceTable, bench_convergence, epochs_to_reach, sampling_study, write_convergence,
)

__all__ = [
    'BenchResult', 'bench_distance', 'reference_checksums', 'verify_kernels', 'write_bench_results',
    'ConvergenceRun', 'ConvergenceTable', 'bench_convergence', 'epochs_to_reach', 'sampling_study',
    'write_convergence',
]
