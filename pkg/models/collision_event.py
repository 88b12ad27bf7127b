from dataclasses import dataclass


@dataclass(frozen=True)
class CollisionEvent:
    """A collision moment t0 with its colliding clusters (1-based body indices).

    Clusters are listed by increasing limit point. The fit fields hold one entry
    per cluster and stay None for singletons or until `analyze_event` fills them;
    `fit_t0` is the moment the blow-up fit of that cluster settled on.
    """

    t0: float
    clusters: tuple
    limit_points: tuple
    side: str = "both"
    node: int = 0
    merged: bool = False
    exponent_fit: tuple = None
    fit_r2: tuple = None
    fit_t0: tuple = None
    limit_cc: tuple = None
    cc_residual: tuple = None
    order_matches: tuple = None

    @property
    def colliding_clusters(self):
        """Indices into `clusters` of the clusters with at least two bodies."""
        return [k for k, cluster in enumerate(self.clusters) if len(cluster) > 1]

    def to_dict(self):
        return {
            "t0": self.t0,
            "clusters": [list(c) for c in self.clusters],
            "limit_points": list(self.limit_points),
            "side": self.side,
            "node": self.node,
            "merged": self.merged,
            "exponent_fit": None if self.exponent_fit is None else list(self.exponent_fit),
            "fit_r2": None if self.fit_r2 is None else list(self.fit_r2),
            "fit_t0": None if self.fit_t0 is None else list(self.fit_t0),
            "limit_cc": None
            if self.limit_cc is None
            else [None if s is None else list(s) for s in self.limit_cc],
            "cc_residual": None if self.cc_residual is None else list(self.cc_residual),
            "order_matches": None if self.order_matches is None else list(self.order_matches),
        }

    def __repr__(self):
        return f"<CollisionEvent t0={self.t0:.6g} clusters={self.clusters}>"
