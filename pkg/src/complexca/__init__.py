"""Cellular automata complexity, coarse-graining and reservoir computing toolkit.

Submodules:
    ca          rule tables, stepping, simulation, convolutional form
    sampling    Langton lambda, uniform and Dirichlet rule sampling
    tinynet     small dense networks trained by SGD
    complexity  compressed length, lookup and neural predictability scores
    coarse      block histograms, dithering, k-means, autoencoder, filters
    reservoir   echo-state networks, CA reservoirs, online softmax decoder
    tasks       the ten sequence-prediction task generators
    evaluation  masked accuracy, time-to-threshold, WADE
    harness     benchmark runs, rule search, result files
    io          rule, image, bundle and CSV formats
    cli         the ``complexca`` command
"""
__version__ = "0.1.0"
