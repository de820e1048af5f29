"""Automatic FTTH/GPON access network design with a two-level genetic algorithm."""

from .bench import brute_force_oracle, greedy_baseline, run_stats, synth_instance
from .bom import build_bill, select_cables, select_splitters
from .fitness import Caches, evaluate, material_cost
from .ga import GAConfig, evolve
from .genotype import Genotype, Individual
from .model import BusinessRules, NetworkMap, load_map, load_rules, preprocess, usable_ports
from .validator import DesignSolution, validate

__all__ = [
    "BusinessRules", "Caches", "DesignSolution", "GAConfig", "Genotype", "Individual", "NetworkMap",
    "brute_force_oracle", "build_bill", "evaluate", "evolve", "greedy_baseline", "load_map", "load_rules",
    "material_cost", "preprocess", "run_stats", "select_cables", "select_splitters", "synth_instance",
    "usable_ports", "validate",
]
