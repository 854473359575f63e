from .affinity import (affinity_propagation, cluster_appearance, cluster_part_patches, cluster_poses,
                       exemplars_to_clusters, median_preference)
from .greedy import GreedyParams, PartCluster, PatchPool, greedy_cluster

__all__ = [
    "affinity_propagation", "cluster_appearance", "cluster_part_patches", "cluster_poses",
    "exemplars_to_clusters", "median_preference", "GreedyParams", "PartCluster", "PatchPool",
    "greedy_cluster",
]
