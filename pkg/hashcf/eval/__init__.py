from .metrics import EvalReport, RankedList, evaluate, ndcg_at_k, reciprocal_rank, rank_user
from .curves import bucket_curve, item_popularity, plot_curve, report_curves, user_keys, write_curve_csv

__all__ = [
    'EvalReport', 'RankedList', 'evaluate', 'ndcg_at_k', 'reciprocal_rank', 'rank_user',
    'bucket_curve', 'item_popularity', 'plot_curve', 'report_curves', 'user_keys', 'write_curve_csv',
]
