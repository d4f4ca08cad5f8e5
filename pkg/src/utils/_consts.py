from consts import DataFormat, Setting, Variant


def get_best_params(dataset, variant, setting):
    """
    Best (k, lambda, hidden units) reported for each RecNet variant.
    Interacted setting: prediction only over shown items; all setting: over the whole catalog.
    Goal: So a run can reproduce a published configuration by name.
    """
    dataset = dataset.lower()
    variant = Variant(variant)
    setting = Setting(setting)

    if setting == Setting.INTERACTED:
        if dataset == "ml-100k":
            table = {Variant.C: (1, 0.05, 32), Variant.P: (2, 0.005, 64), Variant.CP: (2, 0.005, 16)}
        elif dataset == "ml-1m":
            table = {Variant.C: (16, 0.05, 32), Variant.P: (1, 0.0001, 16), Variant.CP: (1, 0.001, 32)}
        elif dataset == "netflix":
            table = {Variant.C: (9, 0.05, 64), Variant.P: (2, 0.01, 16), Variant.CP: (6, 0.05, 16)}
        elif dataset == "kasandr":
            table = {Variant.C: (19, 0.0001, 64), Variant.P: (1, 0.05, 16), Variant.CP: (18, 0.005, 64)}
        else:
            raise KeyError(f"no preset for dataset {dataset!r}")
    else:
        if dataset == "ml-100k":
            table = {Variant.C: (15, 0.001, 32), Variant.P: (5, 0.001, 16), Variant.CP: (8, 0.001, 16)}
        elif dataset == "ml-1m":
            table = {Variant.C: (2, 0.05, 32), Variant.P: (11, 0.0001, 64), Variant.CP: (2, 0.001, 32)}
        elif dataset == "netflix":
            table = {Variant.C: (3, 0.0001, 32), Variant.P: (13, 0.001, 64), Variant.CP: (1, 0.001, 64)}
        elif dataset == "kasandr":
            table = {Variant.C: (4, 0.001, 32), Variant.P: (16, 0.0001, 64), Variant.CP: (14, 0.05, 64)}
        else:
            raise KeyError(f"no preset for dataset {dataset!r}")

    k, lam, units = table[variant]
    return {"embed_dim": k, "lam": lam, "hidden_units": units}


def get_reference_statistics(dataset):
    """
    Collection statistics after preprocessing: (users, items, interactions, sparsity %).
    Goal: So `prepare` can print the published numbers next to the measured ones.
    """
    dataset = dataset.lower()
    if dataset == "ml-100k":
        return 943, 1682, 100_000, 93.685
    elif dataset == "ml-1m":
        return 6040, 3706, 1_000_209, 95.530
    elif dataset == "netflix":
        return 90_137, 3560, 4_188_098, 98.700
    elif dataset == "kasandr":
        return 25_848, 1_513_038, 9_489_273, 99.976
    return None


def get_threshold(data_format):
    """
    Binarization threshold for the given log format.
    Ratings are on a 1-5 scale and a rating of 4 or more is a preference; clicks are already 0/1.
    """
    return 1.0 if DataFormat(data_format) == DataFormat.TSV_CLICK else 4.0


def get_progress_window(epochs):
    """
    Number of iterations summarised by one progress log line.
    Goal: So short runs still log something and long runs don't flood the terminal.
    """
    if epochs <= 100:
        return 10
    elif epochs <= 5000:
        return 100
    else:
        return 500
