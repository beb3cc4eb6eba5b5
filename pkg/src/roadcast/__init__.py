"""Traffic congestion forecasting at desk scale.

Pipeline: simulate a sensed road network, identify congestion bottlenecks,
build a case library, learn tree-CPD Bayesian networks over bottleneck and
context variables, forecast time-to-clear / time-to-jam with confidence,
meta-predict forecast reliability, detect and forecast surprising states,
and evaluate route-centric alert policies.
"""

__version__ = "0.1.0"
