from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import spearmanr

from concepts.encoding import slot_indices


@dataclass
class TopsimResult:
    value: float
    degenerate: bool = False
    pairs: int = 0


def pairwise_distances(table: dict) -> tuple:
    """回傳 (concept 欄位 Hamming 距離, 訊息逐位置不同的數量)，依 pdist 的 pair 順序"""
    concepts = np.array([slot_indices(concept) for concept in table])
    messages = np.array([message.symbols for message in table.values()])
    concept_distances = pdist(concepts, metric='hamming') * concepts.shape[1]
    message_distances = pdist(messages, metric='hamming') * messages.shape[1]
    return np.rint(concept_distances), np.rint(message_distances)


def topsim(table: dict) -> TopsimResult:
    """
    concept 距離與訊息距離在所有無序 pair 上的 Spearman 相關（同分取平均名次）。
    任一邊距離全部相同時相關無定義，回傳 0 並標記 degenerate。
    """
    if len(table) < 2:
        raise ValueError("topsim 至少需要兩個 concept")
    concept_distances, message_distances = pairwise_distances(table)
    pairs = concept_distances.shape[0]
    if np.all(message_distances == message_distances[0]) or np.all(concept_distances == concept_distances[0]):
        return TopsimResult(value=0.0, degenerate=True, pairs=pairs)
    correlation = spearmanr(concept_distances, message_distances).statistic
    return TopsimResult(value=float(correlation), pairs=pairs)
