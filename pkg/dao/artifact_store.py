"""
DAO de artefatos do pipeline.

Este módulo é o cérebro que decide se um artefato é reaproveitado do disco
ou recomputado, orquestrando o fluxo: verificação do índice -> cômputo ->
persistência -> registro no índice.

Layout de um diretório de experimento:
    <root>/artifact_index.sqlite
    <root>/<stage>/<artifact_key>/manifest.json  (+ npz / weights.bin / csv)

Todo diretório de artefato é autodescritivo: o manifest.json basta para
re-derivar o estágio. Manifestos não carregam timestamps.
"""
import json
import logging
import shutil
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import torch
from cachetools import LRUCache

from exceptions import MissingUpstream
from attacks.property import PropInfResult
from attacks.results import AttackResult
from compositions.plans import CompositionOutcome, CompositionPlan
from dao.sqlite_client import ensure_table_exists, get_artifact, index_path, read_index, upsert_rows
from models.architectures import build_network
from models.fleet import FleetMember, LiraFleet
from models.training import EpochLog, ModelConfig, TrainedModel
from transform.canonical import canonical_json, content_hash
from transform.partition import PARTITIONS, DatasetBundle, PartitionSpec
from transform.samples import PropertyProportion, SampleSet

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"
WEIGHTS_MAGIC = b"WTS1"
FLEET_INDEX_NAME = "fleet_index.csv"
MODEL_CACHE_SIZE = 64
FEATURE_CACHE_SIZE = 128


# --- Serialização de baixo nível ---

def write_manifest(directory: Path, payload: dict) -> Path:
    """Grava manifest.json canônico (chaves ordenadas, indentado, sem timestamps)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    text = json.dumps(json.loads(canonical_json(payload)), indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


def read_manifest(directory: Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise MissingUpstream(f"Manifesto ausente: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def save_samples(samples: SampleSet, path: Path) -> None:
    np.savez(
        path,
        **samples.to_arrays(),
        cardinals=np.array([samples.num_classes, samples.num_attributes, samples.num_properties]),
    )


def load_samples(path: Path) -> SampleSet:
    with np.load(path) as data:
        num_classes, num_attributes, num_properties = (int(v) for v in data["cardinals"])
        return SampleSet(
            ids=data["ids"],
            features=data["features"],
            task_labels=data["task_labels"],
            attributes=data["attributes"],
            properties=data["properties"],
            num_classes=num_classes,
            num_attributes=num_attributes,
            num_properties=num_properties,
        )


def write_weights(state: Dict[str, np.ndarray], names: List[str], path: Path) -> None:
    """
    Blob binário de pesos: magic, número de tensores e, por tensor, ndim e
    dimensões (uint32 little-endian); em seguida os valores em float32.
    """
    header = [np.array([len(names)], dtype="<u4")]
    for name in names:
        shape = state[name].shape
        header.append(np.array([len(shape), *shape], dtype="<u4"))
    with open(path, "wb") as handle:
        handle.write(WEIGHTS_MAGIC)
        for part in header:
            handle.write(part.tobytes())
        for name in names:
            handle.write(np.ascontiguousarray(state[name], dtype="<f4").tobytes())


def read_weights(path: Path, names: List[str]) -> Dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != WEIGHTS_MAGIC:
        raise ValueError(f"Blob de pesos inválido: {path}")
    offset = 4
    count = int(np.frombuffer(raw, dtype="<u4", count=1, offset=offset)[0])
    offset += 4
    if count != len(names):
        raise ValueError(f"{path}: {count} tensores no blob, {len(names)} no manifesto")
    shapes = []
    for _ in range(count):
        ndim = int(np.frombuffer(raw, dtype="<u4", count=1, offset=offset)[0])
        offset += 4
        shapes.append(tuple(int(d) for d in np.frombuffer(raw, dtype="<u4", count=ndim, offset=offset)))
        offset += 4 * ndim
    state = {}
    for name, shape in zip(names, shapes):
        size = int(np.prod(shape)) if shape else 1
        state[name] = np.frombuffer(raw, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += 4 * size
    return state


# --- Checkpoints ---

def save_model(model: TrainedModel, directory: Path) -> None:
    """Checkpoint: manifesto (config, seed, log de treino) + blob de pesos."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = model.state_arrays()
    names = list(state)
    write_weights(state, names, directory / WEIGHTS_NAME)
    write_manifest(directory, {
        "kind": "checkpoint",
        "tensors": names,
        "seed": model.config.seed,
        "fingerprint": model.fingerprint(),
        **model.provenance(),
    })


def load_model(directory: Path) -> TrainedModel:
    manifest = read_manifest(directory)
    config = ModelConfig.from_dict(manifest["config"])
    input_shape = tuple(manifest["input_shape"])
    network = build_network(config.architecture_id, input_shape, manifest["num_classes"], config.seed)
    arrays = read_weights(Path(directory) / WEIGHTS_NAME, manifest["tensors"])
    template = network.state_dict()
    network.load_state_dict({
        name: torch.from_numpy(arrays[name].copy()).to(template[name].dtype) for name in manifest["tensors"]
    })
    network.eval()
    return TrainedModel(
        network=network,
        config=config,
        input_shape=input_shape,
        num_classes=manifest["num_classes"],
        training_log=[EpochLog(**entry) for entry in manifest["training_log"]],
        final_train_acc=manifest["final_train_acc"],
        final_test_acc=manifest["final_test_acc"],
        stop_reason=manifest["stop_reason"],
        noise_multiplier=manifest["noise_multiplier"],
    )


# --- Bundles ---

def proportion_text(proportion: PropertyProportion) -> str:
    """Pesos exatos (repr) separados por ":"; ida e volta sem perda."""
    return ":".join(repr(w) for w in proportion.weights)


def proportion_from_text(text: str) -> PropertyProportion:
    return PropertyProportion(tuple(float(part) for part in str(text).split(":")))


def save_bundle(bundle: DatasetBundle, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, samples in bundle.partitions().items():
        save_samples(samples, directory / f"{name}.npz")
    save_samples(bundle.partial_aux, directory / "partial_aux.npz")
    save_samples(bundle.query_pool, directory / "query_pool.npz")
    files = []
    for index, (proportion, samples) in enumerate(sorted(bundle.query_aux.items())):
        filename = f"query_{index:02d}.npz"
        files.append({"proportion": proportion_text(proportion), "file": filename})
        save_samples(samples, directory / filename)
    write_manifest(directory, {
        "kind": "bundle",
        **bundle.manifest(),
        "query_files": files,
        "fingerprints": {name: s.fingerprint() for name, s in sorted(bundle.partitions().items())},
    })


def load_bundle(directory: Path) -> DatasetBundle:
    directory = Path(directory)
    manifest = read_manifest(directory)
    parts = {name: load_samples(directory / f"{name}.npz") for name in PARTITIONS}
    query_aux = {
        proportion_from_text(entry["proportion"]): load_samples(directory / entry["file"])
        for entry in manifest["query_files"]
    }
    return DatasetBundle(
        **parts,
        query_aux=query_aux,
        partial_aux=load_samples(directory / "partial_aux.npz"),
        query_pool=load_samples(directory / "query_pool.npz"),
        seed=manifest["seed"],
        spec=PartitionSpec.from_dict(manifest["spec"]),
        positions=manifest["positions"],
    )


# --- Frotas ---

def save_shadow_fleet(fleet: List[FleetMember], directory: Path) -> None:
    """Um checkpoint por membro + fleet_index.csv (checkpoint, proportion, seed)."""
    directory = Path(directory)
    rows = []
    for index, (model, proportion) in enumerate(fleet):
        name = f"member_{index:04d}"
        save_model(model, directory / name)
        rows.append({"checkpoint": name, "proportion": proportion_text(proportion), "seed": model.config.seed})
    pd.DataFrame(rows, columns=["checkpoint", "proportion", "seed"]).to_csv(
        directory / FLEET_INDEX_NAME, index=False, lineterminator="\n"
    )
    write_manifest(directory, {"kind": "shadow_fleet", "members": rows})


def load_shadow_fleet(directory: Path) -> List[FleetMember]:
    directory = Path(directory)
    index = pd.read_csv(directory / FLEET_INDEX_NAME, dtype={"proportion": str})
    return [
        (load_model(directory / row.checkpoint), proportion_from_text(row.proportion))
        for row in index.itertuples(index=False)
    ]


def save_lira_fleet(fleet: LiraFleet, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for index, model in enumerate(fleet.models):
        save_model(model, directory / f"member_{index:04d}")
    np.save(directory / "inclusion.npy", np.asarray(fleet.inclusion))
    save_samples(fleet.pool, directory / "pool.npz")
    write_manifest(directory, {
        "kind": "lira_fleet",
        "n_models": len(fleet.models),
        "pool_fingerprint": fleet.pool.fingerprint(),
    })


def load_lira_fleet(directory: Path) -> LiraFleet:
    directory = Path(directory)
    manifest = read_manifest(directory)
    models = [load_model(directory / f"member_{i:04d}") for i in range(manifest["n_models"])]
    inclusion = np.load(directory / "inclusion.npy")
    inclusion.setflags(write=False)
    return LiraFleet(models=models, pool=load_samples(directory / "pool.npz"), inclusion=inclusion)


# --- Resultados ---

def save_attack_result(result: AttackResult, directory: Path) -> None:
    """manifest.json (métricas + detalhes) + scores.csv (uma linha por amostra)."""
    directory = Path(directory)
    write_manifest(directory, {"kind": "attack_result", **result.to_dict()})
    result.to_frame().to_csv(directory / "scores.csv", index=False, float_format="%.17g", lineterminator="\n")


def load_attack_result(directory: Path) -> AttackResult:
    directory = Path(directory)
    manifest = read_manifest(directory)
    frame = pd.read_csv(directory / "scores.csv")
    return AttackResult(
        scores=frame["score"].to_numpy(dtype=np.float64),
        predictions=frame["prediction"].to_numpy(),
        ground_truth=frame["ground_truth"].to_numpy(),
        metrics=manifest["metrics"],
        sample_ids=frame["sample_id"].to_numpy() if "sample_id" in frame else None,
        details=manifest["details"],
    )


def save_propinf_result(result: PropInfResult, directory: Path) -> None:
    directory = Path(directory)
    save_attack_result(result.heldout, directory / "heldout")
    write_manifest(directory, {
        "kind": "propinf_result",
        **result.to_dict(),
        "predicted_weights": proportion_text(result.predicted_proportion),
        "label_weights": [proportion_text(p) for p in result.labels],
    })


def load_propinf_result(directory: Path) -> PropInfResult:
    directory = Path(directory)
    manifest = read_manifest(directory)
    return PropInfResult(
        predicted_proportion=proportion_from_text(manifest["predicted_weights"]),
        confidence=manifest["confidence"],
        class_posteriors=manifest["class_posteriors"],
        heldout=load_attack_result(directory / "heldout"),
        labels=[proportion_from_text(text) for text in manifest["label_weights"]],
        feature_length=manifest["feature_length"],
    )


def save_result(result, directory: Path) -> None:
    if isinstance(result, PropInfResult):
        save_propinf_result(result, directory)
    else:
        save_attack_result(result, directory)


def load_result(directory: Path):
    if read_manifest(directory)["kind"] == "propinf_result":
        return load_propinf_result(directory)
    return load_attack_result(directory)


def save_outcome(outcome: CompositionOutcome, directory: Path, **context) -> None:
    """Manifesto da composição (com contexto do relatório) + origem, composição e vetores por amostra."""
    directory = Path(directory)
    save_result(outcome.origin, directory / "origin")
    save_result(outcome.composition, directory / "composition")
    if outcome.arrays:
        np.savez(directory / "arrays.npz", **{k: np.asarray(v) for k, v in sorted(outcome.arrays.items())})
    write_manifest(directory, {"kind": "composition", **outcome.manifest(**context)})


def load_outcome(directory: Path) -> CompositionOutcome:
    directory = Path(directory)
    manifest = read_manifest(directory)
    arrays = {}
    if (directory / "arrays.npz").exists():
        with np.load(directory / "arrays.npz") as data:
            arrays = {key: data[key] for key in data.files}
    plan = manifest["plan"]
    return CompositionOutcome(
        plan=CompositionPlan.from_name(plan["name"], plan["mode"]),
        origin=load_result(directory / "origin"),
        composition=load_result(directory / "composition"),
        diagnostics=manifest["diagnostics"],
        arrays=arrays,
    )


class ArtifactStore:
    """
    DAO responsável por decidir reaproveitar ou recomputar cada artefato.

    Um artefato é reaproveitado quando o índice tem a mesma (stage, key)
    com o mesmo hash de entradas e o diretório ainda existe. Objetos já
    carregados ficam em um LRU em memória.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.db_path = index_path(self.root)
        ensure_table_exists(self.db_path)
        self._loaded: LRUCache = LRUCache(maxsize=MODEL_CACHE_SIZE)
        self._features: LRUCache = LRUCache(maxsize=FEATURE_CACHE_SIZE)
        self.hits = 0
        self.misses = 0

    def artifact_dir(self, stage: str, key: str) -> Path:
        return self.root / stage / key

    def is_fresh(self, stage: str, key: str, input_hash: str) -> bool:
        row = get_artifact(self.db_path, stage, key)
        if row is None:
            return False
        if row["input_hash"] != input_hash:
            log.info(f"{stage}/{key}: entradas mudaram, recomputando")
            return False
        if not (self.root / row["path"] / MANIFEST_NAME).exists():
            log.warning(f"{stage}/{key}: registrado no índice mas ausente do disco")
            return False
        return True

    def register(self, stage: str, key: str, input_hash: str, kind: str) -> None:
        path = self.artifact_dir(stage, key).relative_to(self.root)
        upsert_rows(
            pd.DataFrame([{
                "stage": stage,
                "artifact_key": key,
                "input_hash": input_hash,
                "kind": kind,
                "path": path.as_posix(),
            }]),
            self.db_path,
        )

    def ensure(
        self,
        stage: str,
        key: str,
        input_hash: str,
        compute: Callable[[], Any],
        save: Callable[[Any, Path], None],
        load: Callable[[Path], Any],
        kind: Optional[str] = None,
    ) -> Any:
        """
        Garante que o artefato existe e retorna o objeto.

        Se o índice já tem o artefato com o mesmo hash, carrega do disco.
        Se não, executa o fluxo completo: compute -> save -> registro.

        Args:
            stage: Estágio do pipeline (prepare, train, attack, compose, report)
            key: Chave do artefato dentro do estágio
            input_hash: Hash canônico das entradas
            compute: Função sem argumentos que produz o objeto
            save: save(obj, diretório)
            load: load(diretório) -> obj
            kind: Tipo registrado no índice (padrão: stage)
        """
        cache_key = (stage, key, input_hash)
        if cache_key in self._loaded:
            self.hits += 1
            return self._loaded[cache_key]

        directory = self.artifact_dir(stage, key)
        if self.is_fresh(stage, key, input_hash):
            log.debug(f"Reaproveitando {stage}/{key}")
            self.hits += 1
            obj = load(directory)
        else:
            self.misses += 1
            log.info(f"Computando {stage}/{key}")
            obj = compute()
            try:
                if directory.exists():
                    shutil.rmtree(directory)
                save(obj, directory)
                self.register(stage, key, input_hash, kind or stage)
            except Exception as e:
                log.error(f"Erro ao salvar {stage}/{key}: {e}")
                raise
        self._loaded[cache_key] = obj
        return obj

    def require(
        self,
        stage: str,
        key: str,
        load: Callable[[Path], Any],
        input_hash: Optional[str] = None,
    ) -> Any:
        """
        Carrega um artefato de um estágio que não foi pedido nesta execução.

        Raises:
            MissingUpstream: O artefato não está no índice ou no disco, ou foi
                produzido com entradas diferentes de `input_hash`
        """
        row = get_artifact(self.db_path, stage, key)
        if row is None or not (self.root / row["path"] / MANIFEST_NAME).exists():
            raise MissingUpstream(f"Artefato ausente: {stage}/{key}")
        if input_hash is not None and row["input_hash"] != input_hash:
            raise MissingUpstream(f"Artefato desatualizado: {stage}/{key} (rode o estágio {stage} de novo)")
        cache_key = (stage, key, row["input_hash"])
        if cache_key not in self._loaded:
            self._loaded[cache_key] = load(self.root / row["path"])
        return self._loaded[cache_key]

    def cached_features(
        self,
        kind: str,
        model: TrainedModel,
        samples: SampleSet,
        params: dict,
        compute: Callable[[], np.ndarray],
    ) -> np.ndarray:
        """
        Matriz de features por (modelo, amostras, parâmetros), com cache em
        memória e em disco (features/<hash>/values.npy).
        """
        key = content_hash({
            "kind": kind,
            "model": model.fingerprint(),
            "samples": samples.fingerprint(),
            "params": params,
        })
        if key in self._features:
            return self._features[key]
        directory = self.root / "features" / key
        if (directory / "values.npy").exists():
            values = np.load(directory / "values.npy")
        else:
            values = np.asarray(compute())
            directory.mkdir(parents=True, exist_ok=True)
            np.save(directory / "values.npy", values)
            write_manifest(directory, {"kind": kind, "params": params, "shape": list(values.shape)})
        values.setflags(write=False)
        self._features[key] = values
        return values

    def list_artifacts(self, stage: Optional[str] = None) -> pd.DataFrame:
        return read_index(self.db_path, stage)

