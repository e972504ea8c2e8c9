# stt/models/world.py
from dataclasses import dataclass
from typing import Dict, List

import networkx as nx


@dataclass(frozen=True, eq=False)
class CommGraph:
    """Directed communication graph for one step: an edge i -> j means i listens to j."""
    graph: nx.DiGraph

    def neighbors(self, i: int) -> List[int]:
        return sorted(self.graph.successors(i))

    def neighbor_sets(self) -> Dict[int, List[int]]:
        return {i: self.neighbors(i) for i in sorted(self.graph.nodes)}

    @property
    def n(self) -> int:
        return self.graph.number_of_nodes()
