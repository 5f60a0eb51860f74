"""Classical modulation baselines, BER bookkeeping and the experiment CLI."""
