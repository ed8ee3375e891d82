"""Operator command line: ingest, split, train, evaluate, report, serve.

Every run writes its resolved configuration next to its outputs and embeds
the configuration hash in the artifacts it produces. Exit codes: 0 ok,
1 usage error, 2 data error, 3 capacity error.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
from pathlib import Path

import click
import numpy as np

from . import __version__, elicitation, evaluation, kernels, synth
from . import greedy as greedy_mod
from . import interactions as inter
from . import lfm as lfm_mod
from . import slim as slim_mod
from .errors import CapacityError, SlimboardError, ValidationError

GIB = 1024**3


# -- shared helpers ------------------------------------------------------------------


def _parse_number(token: str) -> float:
    """A float literal or a power like `2^12`."""
    token = token.strip()
    if "^" in token:
        base, _, exponent = token.partition("^")
        return float(base) ** float(exponent)
    return float(token)


def _parse_grid(text: str) -> tuple[float, ...]:
    values = tuple(_parse_number(t) for t in text.split(",") if t.strip())
    if not values:
        raise click.UsageError(f"empty grid {text!r}")
    return values


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def write_run_config(path, command: str, params: dict) -> str:
    """Write the resolved `key = value` config; return its content hash."""
    lines = [f"command = {command}"]
    for key in sorted(params):
        lines.append(f"{key} = {_format_value(params[key])}")
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_config_file(ctx: click.Context, param: click.Parameter, value):
    """`key = value` file; `section.key` scopes to one subcommand."""
    if value is None:
        return None
    common: dict[str, str] = {}
    scoped: dict[str, dict[str, str]] = {}
    with open(value, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise click.UsageError(f"{value}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if "." in key:
                section, _, key = key.partition(".")
                scoped.setdefault(section.strip(), {})[key.replace("-", "_")] = val
            else:
                common[key.replace("-", "_")] = val
    group = ctx.command
    default_map: dict[str, dict[str, str]] = {}
    for name in group.commands:  # type: ignore[attr-defined]
        default_map[name] = dict(common)
        default_map[name].update(scoped.get(name, {}))
    ctx.default_map = default_map
    return None


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config_file,
    expose_value=False,
    is_eager=True,
    help="key = value file with defaults; flags override it.",
)
@click.option("--threads", type=int, default=None, help="Cap parallel workers.")
def cli(threads):
    """Questionnaire training and evaluation toolkit."""
    if threads is not None:
        if threads < 1:
            raise click.UsageError("--threads must be at least 1")
        kernels.set_num_threads(threads)


# -- data commands -------------------------------------------------------------------


@cli.command()
@click.argument("ratings", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option(
    "--format", "fmt",
    type=click.Choice(["auto", "csv_header", "csv_plain"]),
    default="auto", show_default=True,
)
@click.option("--id-maps/--no-id-maps", default=True, show_default=True,
              help="Also write internal/external id map CSVs.")
def ingest(ratings, out, fmt, id_maps):
    """Load a ratings CSV into a dataset artifact."""
    X = inter.load_ratings(ratings, fmt)
    cfg_hash = write_run_config(
        out + ".config", "ingest", {"ratings": ratings, "out": out, "format": fmt}
    )
    inter.save_dataset(X, out, config_hash=cfg_hash)
    if id_maps:
        inter.write_id_map(X.user_ids, out + ".users.csv")
        inter.write_id_map(X.item_ids, out + ".items.csv")
    click.echo(f"{X.num_users} users, {X.num_items} items, {X.nnz} ratings -> {out}")


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--test-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def split(dataset, out_dir, test_fraction, seed):
    """Partition users into train/test dataset artifacts."""
    X = inter.load_dataset(dataset)
    result = inter.split_users(X, test_fraction, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_hash = write_run_config(
        out / "split.config", "split",
        {"dataset": dataset, "test_fraction": test_fraction, "seed": seed},
    )
    inter.save_dataset(result.X_train, out / "train.dataset", config_hash=cfg_hash)
    inter.save_dataset(result.X_test, out / "test.dataset", config_hash=cfg_hash)
    click.echo(
        f"train: {result.X_train.num_users} users, test: {result.X_test.num_users} users"
    )


@cli.command("synth-data")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--users", type=int, default=943, show_default=True)
@click.option("--items", type=int, default=1682, show_default=True)
@click.option("--ratings", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--catalog/--no-catalog", default=True, show_default=True)
def synth_data(out_dir, users, items, ratings, seed, catalog):
    """Generate a synthetic MovieLens-shaped ratings CSV (plus catalog)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_run_config(
        out / "synth.config", "synth-data",
        {"users": users, "items": items, "ratings": ratings, "seed": seed},
    )
    X = synth.synthetic_ratings(users, items, ratings, seed)
    synth.write_ratings_csv(X, out / "ratings.csv")
    if catalog:
        synth.write_catalog_csv(X.item_ids, out / "movies.csv")
    click.echo(f"{X.nnz} ratings over {X.num_users}x{X.num_items} -> {out}/ratings.csv")


# -- training commands ----------------------------------------------------------------


@cli.command("train-gslim")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--lambda1", type=_parse_number, default="1", show_default=True,
              help="L1 weight; powers like 2^12 are accepted.")
@click.option("--lambdaf", "--lambdaF", "lambdaf", type=_parse_number, default="1",
              show_default=True, help="Frobenius weight.")
@click.option("--num-rows", type=int, default=20, show_default=True,
              help="Rows to fill = questionnaire length.")
@click.option("--min-item-ratings", type=int, default=0, show_default=True,
              help="Prune candidate items below this rating count.")
@click.option("--recompute-every", type=int, default=0, show_default=True,
              help="Rebuild the residual from scratch every k rounds (0 = never).")
@click.option("--memory-budget-gb", type=float, default=2.0, show_default=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None,
              help="Training log CSV [default: OUT.log.csv].")
def train_gslim(dataset, out, lambda1, lambdaf, num_rows, min_item_ratings,
                recompute_every, memory_budget_gb, log_path):
    """Train a SLIM model greedily row by row; the row order is the questionnaire."""
    X = inter.load_dataset(dataset)
    hp = slim_mod.HyperParams(lambda1, lambdaf)
    cfg_hash = write_run_config(
        out + ".config", "train-gslim",
        {
            "dataset": dataset, "lambda1": lambda1, "lambdaF": lambdaf,
            "num_rows": num_rows, "min_item_ratings": min_item_ratings,
            "recompute_every": recompute_every, "memory_budget_gb": memory_budget_gb,
        },
    )
    model = greedy_mod.train_greedy(
        X, hp, num_rows,
        min_item_ratings=min_item_ratings,
        recompute_every=recompute_every,
        memory_budget=int(memory_budget_gb * GIB),
    )
    slim_mod.save_model(model, out, config_hash=cfg_hash)
    log_file = log_path or out + ".log.csv"
    with open(log_file, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["round", "item", "delta", "loss", "seconds"])
        for row in model.training_log:
            writer.writerow([row.round, row.item, repr(row.delta), repr(row.loss),
                             f"{row.seconds:.6f}"])
    final = model.training_log[-1].loss
    click.echo(
        f"{len(model.rows)} rows, final loss {final:.6g}, "
        f"backend {kernels.backend_name()} -> {out}"
    )


@cli.command("train-slim-cd")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--lambda1", type=_parse_number, default="1", show_default=True)
@click.option("--lambdaf", "--lambdaF", "lambdaf", type=_parse_number, default="1",
              show_default=True)
@click.option("--max-sweeps", type=int, default=50, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True,
              help="Stop when a sweep changes the loss by less (relative).")
@click.option("--memory-budget-gb", type=float, default=2.0, show_default=True)
def train_slim_cd(dataset, out, lambda1, lambdaf, max_sweeps, tol, memory_budget_gb):
    """Train a full SLIM model by cyclic coordinate descent."""
    X = inter.load_dataset(dataset)
    hp = slim_mod.HyperParams(lambda1, lambdaf)
    cfg_hash = write_run_config(
        out + ".config", "train-slim-cd",
        {
            "dataset": dataset, "lambda1": lambda1, "lambdaF": lambdaf,
            "max_sweeps": max_sweeps, "tol": tol,
            "memory_budget_gb": memory_budget_gb,
        },
    )
    model = slim_mod.train_coordinate_descent(
        X, hp, max_sweeps=max_sweeps, tol=tol,
        memory_budget=int(memory_budget_gb * GIB),
    )
    slim_mod.save_model(model, out, config_hash=cfg_hash)
    sweeps = model.training_log
    click.echo(
        f"{sweeps[-1].sweep} sweeps, final loss {sweeps[-1].loss:.6g}, "
        f"{model.weight_count()} weights -> {out}"
    )


@cli.command("train-svd")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--rank", type=int, default=128, show_default=True,
              help="Number of latent factors.")
@click.option("--seed", type=int, default=0, show_default=True)
def train_svd(dataset, out, rank, seed):
    """Train the PureSVD latent-factor model used by the bandit."""
    X = inter.load_dataset(dataset)
    cfg_hash = write_run_config(
        out + ".config", "train-svd",
        {"dataset": dataset, "rank": rank, "seed": seed},
    )
    model = lfm_mod.train_pure_svd(X, rank, seed)
    lfm_mod.save_lfm(model, out, config_hash=cfg_hash)
    err = lfm_mod.reconstruction_error(X, model)
    click.echo(f"rank {rank}, reconstruction error {err:.6g} -> {out}")


# -- questionnaire and evaluation ------------------------------------------------------


@cli.command()
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(["pop", "var", "greedy", "gslim"]),
              required=True)
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Training dataset (item ids; statistics for pop/var/greedy).")
@click.option("--slim-model", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Required for greedy and gslim.")
@click.option("--length", type=int, default=20, show_default=True)
def questionnaire(out, method, dataset, slim_model, length):
    """Export a static questionnaire as position/item CSV."""
    X = inter.load_dataset(dataset)
    if method in ("greedy", "gslim") and slim_model is None:
        raise click.UsageError(f"--method {method} needs --slim-model")
    if method == "pop":
        q = elicitation.q_pop(X)
    elif method == "var":
        q = elicitation.q_var(X)
    elif method == "greedy":
        model = slim_mod.load_model(slim_model)
        q = elicitation.q_greedy(X, model, length=length)
    else:
        model = slim_mod.load_model(slim_model)
        q = elicitation.q_gslim(model, min_length=length)
    order = q.order[:length]
    if len(order) < length:
        raise ValidationError(
            f"questionnaire provides {len(order)} items, {length} requested"
        )
    write_run_config(
        out + ".config", "questionnaire",
        {"method": method, "dataset": dataset, "slim_model": slim_model or "",
         "length": length},
    )
    elicitation.write_questionnaire_csv(order, X.item_ids, out)
    click.echo(f"{len(order)} questions -> {out}")


def _build_questionnaire(name, X_train, slim_model, lfm_model, sigma, max_cp):
    if name == "pop":
        return elicitation.q_pop(X_train)
    if name == "var":
        return elicitation.q_var(X_train)
    if name == "greedy":
        if slim_model is None:
            raise click.UsageError("--questionnaire greedy needs --slim-model")
        return elicitation.q_greedy(X_train, slim_model, length=X_train.num_items)
    if name == "gslim":
        if slim_model is None:
            raise click.UsageError("--questionnaire gslim needs --slim-model")
        return elicitation.q_gslim(slim_model, min_length=max_cp)
    if name == "bandit":
        if lfm_model is None:
            raise click.UsageError("--questionnaire bandit needs --lfm-model")
        return elicitation.BanditQuestionnaire(lfm_model, sigma=sigma)
    raise click.UsageError(f"unknown questionnaire {name!r}")


def _build_recommender(name, X_train, slim_model, lfm_model):
    if name == "slim":
        if slim_model is None:
            raise click.UsageError("--recommender slim needs --slim-model")
        return elicitation.slim_recommender(slim_model)
    if name == "bandit":
        if lfm_model is None:
            raise click.UsageError("--recommender bandit needs --lfm-model")
        return elicitation.bandit_recommender(lfm_model)
    if name == "gain":
        return elicitation.gain_recommender(X_train)
    raise click.UsageError(f"unknown recommender {name!r}")


DEFAULT_RECOMMENDER = {
    "pop": "slim", "var": "slim", "greedy": "slim", "gslim": "slim",
    "bandit": "bandit", "none": "gain",
}


@cli.command()
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--questionnaire", "q_name",
              type=click.Choice(["pop", "var", "greedy", "gslim", "bandit", "none"]),
              required=True)
@click.option("--recommender", "r_name",
              type=click.Choice(["slim", "bandit", "gain"]), default=None,
              help="[default: slim for static questionnaires, bandit for bandit, "
                   "gain for none]")
@click.option("--slim-model", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--lfm-model", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--checkpoints", default="5,10,15,20", show_default=True)
@click.option("--n-values", default="5,10", show_default=True)
@click.option("--restriction", type=click.Choice(["all", "long_tail"]), default="all",
              show_default=True)
@click.option("--coverage", type=float, default=0.33, show_default=True,
              help="Short-head rating coverage for the popularity split.")
@click.option("--pop-from", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Dataset for the popularity split [default: the training set].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--include-asked-in-relevants", is_flag=True, default=False,
              help="Keep asked items in the precision/recall ground truth.")
@click.option("--out-prefix", type=click.Path(dir_okay=False), required=True)
def evaluate(train_path, test_path, q_name, r_name, slim_model, lfm_model, sigma,
             checkpoints, n_values, restriction, coverage, pop_from, seed,
             include_asked_in_relevants, out_prefix):
    """Run the offline cold-start protocol and write report JSON + raw CSV."""
    X_train = inter.load_dataset(train_path)
    X_test = inter.load_dataset(test_path)
    if X_train.num_items != X_test.num_items:
        raise ValidationError("train and test datasets disagree on the item space")
    smodel = slim_mod.load_model(slim_model) if slim_model else None
    if smodel is not None and smodel.num_items != X_train.num_items:
        raise ValidationError("item-item model does not match the dataset dimensions")
    lmodel = lfm_mod.load_lfm(lfm_model) if lfm_model else None
    if lmodel is not None and (
        lmodel.num_items != X_train.num_items
        or lmodel.num_users != X_train.num_users
    ):
        raise ValidationError("factor model does not match the dataset dimensions")

    cfg = evaluation.EvalConfig(
        checkpoints=_parse_int_list(checkpoints),
        n_values=_parse_int_list(n_values),
        item_restriction=restriction,
        seed=seed,
        include_asked_in_relevants=include_asked_in_relevants,
    )
    pop_X = inter.load_dataset(pop_from) if pop_from else X_train
    if pop_X.num_items != X_train.num_items:
        raise ValidationError("popularity dataset disagrees on the item space")
    pop = inter.short_head_split(pop_X, coverage)

    r_name = r_name or DEFAULT_RECOMMENDER[q_name]
    cfg_hash = write_run_config(
        out_prefix + ".config", "evaluate",
        {
            "train": train_path, "test": test_path, "questionnaire": q_name,
            "recommender": r_name, "slim_model": slim_model or "",
            "lfm_model": lfm_model or "", "sigma": sigma,
            "checkpoints": cfg.checkpoints, "n_values": cfg.n_values,
            "restriction": restriction, "coverage": coverage,
            "pop_from": pop_from or "", "seed": seed,
            "include_asked_in_relevants": include_asked_in_relevants,
        },
    )
    metadata = {
        "questionnaire": q_name,
        "recommender": r_name,
        "train_hash": X_train.content_hash(),
        "test_hash": X_test.content_hash(),
        "slim_model_hash": _file_hash(slim_model) if slim_model else None,
        "lfm_model_hash": _file_hash(lfm_model) if lfm_model else None,
        "config_hash": cfg_hash,
        "coverage": pop.coverage,
    }
    split_obj = inter.DatasetSplit(
        train_users=np.arange(X_train.num_users),
        test_users=np.arange(X_test.num_users),
        X_train=X_train,
        X_test=X_test,
    )
    R = _build_recommender(r_name, X_train, smodel, lmodel)
    if q_name == "none":
        report = evaluation.baseline_gain_report(split_obj, cfg, pop, metadata=metadata)
    else:
        Q = _build_questionnaire(
            q_name, X_train, smodel, lmodel, sigma, max(cfg.checkpoints)
        )
        report = evaluation.simulate_cold_start(Q, R, split_obj, cfg, pop, metadata)

    with open(out_prefix + ".json", "w", encoding="utf-8", newline="\n") as f:
        f.write(evaluation.report_to_json(report))
    evaluation.write_raw_csv(report, out_prefix + ".raw.csv")
    for cp_key in sorted(report.aggregates, key=int):
        table = report.aggregates[cp_key]
        cells = ", ".join(f"{k}={table[k]:.4f}" for k in sorted(table))
        click.echo(f"k={cp_key}: {cells}")


@cli.command()
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Training dataset; the held-out test set is untouched.")
@click.option("--trainer", type=click.Choice(["gslim", "cd", "svd"]), default="gslim",
              show_default=True)
@click.option("--lambda1", "lambda1_grid", default="1", show_default=True,
              help="Comma list; powers like 2^12 are accepted.")
@click.option("--lambdaf", "--lambdaF", "lambdaf_grid", default="1", show_default=True)
@click.option("--rank", "rank_grid", default="32", show_default=True,
              help="Comma list of factor counts (svd trainer).")
@click.option("--inner-test-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--checkpoints", default="5,10,15,20", show_default=True)
@click.option("--n-values", default="5,10", show_default=True)
@click.option("--restriction", type=click.Choice(["all", "long_tail"]), default="all",
              show_default=True)
@click.option("--coverage", type=float, default=0.33, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--memory-budget-gb", type=float, default=2.0, show_default=True)
@click.option("--out-prefix", type=click.Path(dir_okay=False), required=True)
def grid(train_path, trainer, lambda1_grid, lambdaf_grid, rank_grid,
         inner_test_fraction, seed, checkpoints, n_values, restriction, coverage,
         sigma, memory_budget_gb, out_prefix):
    """Parameter search on an inner split of the training set."""
    X = inter.load_dataset(train_path)
    cfg = evaluation.EvalConfig(
        checkpoints=_parse_int_list(checkpoints),
        n_values=_parse_int_list(n_values),
        item_restriction=restriction,
        seed=seed,
    )
    inner = inter.split_users(X, inner_test_fraction, seed)
    pop = inter.short_head_split(inner.X_train, coverage)
    max_cp = max(cfg.checkpoints)
    max_n = max(cfg.n_values)
    budget = int(memory_budget_gb * GIB)

    if trainer == "svd":
        points = [(int(r),) for r in _parse_grid(rank_grid)]
        param_names = ("rank",)
    else:
        points = list(itertools.product(_parse_grid(lambda1_grid),
                                        _parse_grid(lambdaf_grid)))
        param_names = ("lambda1", "lambdaF")

    results = []
    for point in points:
        if trainer == "gslim":
            hp = slim_mod.HyperParams(*point)
            model = greedy_mod.train_greedy(inner.X_train, hp, max_cp,
                                            memory_budget=budget)
            Q = elicitation.q_gslim(model, min_length=max_cp)
            R = elicitation.slim_recommender(model)
        elif trainer == "cd":
            hp = slim_mod.HyperParams(*point)
            model = slim_mod.train_coordinate_descent(inner.X_train, hp,
                                                      memory_budget=budget)
            Q = elicitation.q_greedy(inner.X_train, model, memory_budget=budget)
            R = elicitation.slim_recommender(model)
        else:
            lmodel = lfm_mod.train_pure_svd(inner.X_train, point[0], seed)
            Q = elicitation.BanditQuestionnaire(lmodel, sigma=sigma)
            R = elicitation.bandit_recommender(lmodel)
        report = evaluation.simulate_cold_start(Q, R, inner, cfg, pop)
        score = report.mean(max_cp, "ndcg", max_n)
        results.append((point, score))
        cells = ", ".join(f"{n}={v:g}" for n, v in zip(param_names, point))
        click.echo(f"{cells}: ndcg@{max_n} at k={max_cp} = {score:.4f}")

    # best score first; ties by lexicographically smallest parameters
    results.sort(key=lambda row: (-row[1], row[0]))
    write_run_config(
        out_prefix + ".config", "grid",
        {
            "train": train_path, "trainer": trainer, "lambda1": lambda1_grid,
            "lambdaF": lambdaf_grid, "rank": rank_grid,
            "inner_test_fraction": inner_test_fraction, "seed": seed,
            "checkpoints": cfg.checkpoints, "n_values": cfg.n_values,
            "restriction": restriction, "coverage": coverage, "sigma": sigma,
        },
    )
    with open(out_prefix + ".csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([*param_names, f"ndcg@{max_n}_at_{max_cp}"])
        for point, score in results:
            writer.writerow([*(repr(float(p)) for p in point), repr(score)])
    best_point, best_score = results[0]
    with open(out_prefix + ".best", "w", encoding="utf-8", newline="\n") as f:
        for name, value in zip(param_names, best_point):
            f.write(f"{name} = {float(value)!r}\n")
        f.write(f"score = {best_score!r}\n")
    cells = ", ".join(f"{n}={v:g}" for n, v in zip(param_names, best_point))
    click.echo(f"best: {cells} (score {best_score:.4f})")


@cli.command()
@click.argument("reports", nargs=-1, required=True)
@click.option("--n", type=int, default=10, show_default=True, help="NDCG list size.")
@click.option("--out-svg", type=click.Path(dir_okay=False), required=True)
@click.option("--out-csv", type=click.Path(dir_okay=False), required=True)
def plot(reports, n, out_svg, out_csv):
    """Plot NDCG-vs-questions curves from `label=report.json` pairs."""
    loaded: dict[str, evaluation.EvalReport] = {}
    for spec in reports:
        if "=" not in spec:
            raise click.UsageError(f"expected label=path, got {spec!r}")
        label, _, path = spec.partition("=")
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        loaded[label] = evaluation.EvalReport(
            aggregates=doc["aggregates"], raw=(), metadata=doc.get("metadata", {})
        )
    evaluation.plot_ndcg_curves(loaded, n, out_svg, out_csv)
    click.echo(f"{len(loaded)} curves -> {out_svg}")


# -- verification and serving ----------------------------------------------------------


@cli.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--slim-model", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--lfm-model", type=click.Path(exists=True, dir_okay=False), default=None)
def verify(dataset, slim_model, lfm_model):
    """Re-check artifact invariants (indexes, nonnegativity, orthonormality)."""
    if not any((dataset, slim_model, lfm_model)):
        raise click.UsageError("nothing to verify; pass at least one artifact")
    if dataset:
        X = inter.load_dataset(dataset)
        X.validate()
        click.echo(f"dataset ok: {X.num_users}x{X.num_items}, {X.nnz} ratings")
    if slim_model:
        model = slim_mod.load_model(slim_model)
        slim_mod.validate_model(model)
        click.echo(
            f"slim model ok: {len(model.rows)} rows, {model.weight_count()} weights, "
            f"trainer={model.trainer}"
        )
    if lfm_model:
        model = lfm_mod.load_lfm(lfm_model)
        defect = lfm_mod.orthonormality_defect(model)
        if defect > 1e-8:
            raise ValidationError(f"factor columns deviate from orthonormal by {defect:g}")
        click.echo(f"factor model ok: rank {model.rank}, orthonormality defect {defect:.2e}")


@cli.command()
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--slim-model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lfm-model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--coverage", type=float, default=0.33, show_default=True)
@click.option("--num-questions", type=int, default=10, show_default=True)
@click.option("--num-recs", type=int, default=10, show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--transcript", type=click.Path(dir_okay=False),
              default="transcript.jsonl", show_default=True)
@click.option("--feedback", type=click.Path(dir_okay=False),
              default="feedback.csv", show_default=True)
@click.option("--blocklist", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File of external item ids never to recommend, one per line.")
@click.option("--webui", type=click.Path(file_okay=False), default=None,
              help="Directory of static UI assets to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(train_path, slim_model, lfm_model, catalog, coverage, num_questions,
          num_recs, sigma, transcript, feedback, blocklist, webui, host, port):
    """Serve the onboarding session API (and optionally the web UI)."""
    import uvicorn

    from . import service as service_mod

    bundle = service_mod.load_bundle(
        train_path, slim_model, lfm_model, catalog_path=catalog, coverage=coverage,
        num_questions=num_questions, num_recs=num_recs, sigma=sigma,
        transcript_path=transcript, feedback_path=feedback, blocklist_path=blocklist,
    )
    app = service_mod.create_app(bundle, webui_dir=webui)
    click.echo(f"serving on http://{host}:{port} (transcript: {transcript})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@cli.command("feedback-report")
@click.argument("feedback_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Also write the aggregate table as CSV.")
def feedback_report(feedback_csv, out):
    """Aggregate feedback verdicts per method (positive-feedback share)."""
    counts: dict[str, dict[str, int]] = {}
    with open(feedback_csv, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            method = row["method"]
            verdict = row["verdict"]
            counts.setdefault(method, {v: 0 for v in service_verdicts()})[verdict] += 1
    rows = []
    for method in sorted(counts):
        c = counts[method]
        total = sum(c.values())
        known = total - c["dont_know"]
        positive = c["good"] + c["very_good"]
        pf = positive / known if known else 0.0
        rows.append((method, total, c["bad"], c["good"], c["very_good"],
                     c["dont_know"], pf))
        click.echo(
            f"{method}: {total} verdicts, PF {pf:.1%} "
            f"(bad {c['bad']}, good {c['good']}, very_good {c['very_good']}, "
            f"dont_know {c['dont_know']})"
        )
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["method", "total", "bad", "good", "very_good",
                             "dont_know", "positive_fraction"])
            for row in rows:
                writer.writerow([*row[:-1], repr(row[-1])])


def service_verdicts() -> tuple[str, ...]:
    from .service import VERDICTS

    return VERDICTS


def main(argv=None) -> int:
    """Entry point mapping the error taxonomy onto exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except CapacityError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except SlimboardError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
