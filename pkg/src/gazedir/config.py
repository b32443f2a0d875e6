"""Run configuration: defaults, INI config files, CLI overrides.

The file format is flat key=value INI with sections [data], [train],
[augment], [map3]. Unknown sections or keys are rejected. The effective
config has a canonical text form whose hash is stamped into every report.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field, fields

from .augment import AugmentPolicy
from .dataset import DEFAULT_THREE_CLASS_MAP, EacClass, ThreeClass, default_patch_hw


class ConfigError(ValueError):
    pass


_DATA_KEYS = {"manifest", "image_root", "mode", "classes", "patch_h", "patch_w",
              "subject_split"}
_TRAIN_KEYS = {"lr", "batch_size", "epochs", "seed", "model_dir", "report_dir"}
_AUGMENT_KEYS = {"rotations", "sigmas", "scales"}
_MAP3_KEYS = {c.name.lower() for c in EacClass}

_MAP3_VALUES = {
    "left": ThreeClass.LEFT,
    "center": ThreeClass.CENTER,
    "right": ThreeClass.RIGHT,
    "excluded": None,
}


@dataclass
class RunConfig:
    mode: str = "ert"
    classes: int = 7
    patch_h: int | None = None  # None -> mode default
    patch_w: int | None = None
    lr: float = 0.01
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0
    rotations: tuple[float, ...] = (5.0, -5.0, 10.0, -10.0)
    sigmas: tuple[float, ...] = (0.5, 1.0)
    scales: tuple[float, ...] = (0.9, 1.1)
    map3: dict = field(default_factory=lambda: dict(DEFAULT_THREE_CLASS_MAP))
    subject_split: bool = False
    manifest: str | None = None
    image_root: str | None = None
    model_dir: str = "models"
    report_dir: str = "reports"

    @property
    def patch_hw(self) -> tuple[int, int]:
        dh, dw = default_patch_hw(self.mode)
        return (self.patch_h or dh, self.patch_w or dw)

    @property
    def policy(self) -> AugmentPolicy:
        return AugmentPolicy(self.rotations, self.sigmas, self.scales)

    def resolved_image_root(self) -> str:
        if self.image_root is not None:
            return self.image_root
        if self.manifest is not None:
            return os.path.dirname(self.manifest)
        return ""

    def validate(self) -> None:
        if self.mode not in ("roi", "ert"):
            raise ConfigError(f"mode must be roi or ert, got {self.mode!r}")
        if self.classes not in (3, 7):
            raise ConfigError(f"classes must be 3 or 7, got {self.classes}")
        h, w = self.patch_hw
        if h < 8 or w < 8:
            raise ConfigError(f"patch {h}x{w} too small; the network needs >= 8x8")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        missing = [c.name for c in EacClass if c not in self.map3]
        if missing:
            raise ConfigError(f"[map3] missing entries: {', '.join(missing)}")
        try:
            self.policy
        except ValueError as exc:
            raise ConfigError(str(exc))

    def to_ini_text(self) -> str:
        """Canonical INI echo of the effective config; feeding it back
        reproduces the run."""
        h, w = self.patch_hw
        lines = [
            "[data]",
            f"manifest = {self.manifest or ''}",
            f"image_root = {self.resolved_image_root()}",
            f"mode = {self.mode}",
            f"classes = {self.classes}",
            f"patch_h = {h}",
            f"patch_w = {w}",
            f"subject_split = {'true' if self.subject_split else 'false'}",
            "",
            "[train]",
            f"lr = {self.lr!r}",
            f"batch_size = {self.batch_size}",
            f"epochs = {self.epochs}",
            f"seed = {self.seed}",
            f"model_dir = {self.model_dir}",
            f"report_dir = {self.report_dir}",
            "",
            "[augment]",
            f"rotations = {','.join(repr(v) for v in self.rotations)}",
            f"sigmas = {','.join(repr(v) for v in self.sigmas)}",
            f"scales = {','.join(repr(v) for v in self.scales)}",
            "",
            "[map3]",
        ]
        for c in EacClass:
            target = self.map3[c]
            value = "excluded" if target is None else target.name.lower()
            lines.append(f"{c.name.lower()} = {value}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini_text().encode("utf-8")).hexdigest()[:16]

    def as_dict(self) -> dict:
        """JSON-friendly echo of every effective field."""
        h, w = self.patch_hw
        return {
            "mode": self.mode,
            "classes": self.classes,
            "patch_h": h,
            "patch_w": w,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "rotations": list(self.rotations),
            "sigmas": list(self.sigmas),
            "scales": list(self.scales),
            "map3": {
                c.name: (self.map3[c].name if self.map3[c] is not None else "excluded")
                for c in EacClass
            },
            "subject_split": self.subject_split,
            "manifest": self.manifest,
            "image_root": self.resolved_image_root(),
            "model_dir": self.model_dir,
            "report_dir": self.report_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Inverse of as_dict: rebuilds a config from a report's echo."""
        map3 = {
            EacClass[name]: (None if token == "excluded" else ThreeClass[token.upper()])
            for name, token in data["map3"].items()
        }
        cfg = cls(
            mode=data["mode"],
            classes=int(data["classes"]),
            patch_h=int(data["patch_h"]),
            patch_w=int(data["patch_w"]),
            lr=float(data["lr"]),
            batch_size=int(data["batch_size"]),
            epochs=int(data["epochs"]),
            seed=int(data["seed"]),
            rotations=tuple(data["rotations"]),
            sigmas=tuple(data["sigmas"]),
            scales=tuple(data["scales"]),
            map3=map3,
            subject_split=bool(data["subject_split"]),
            manifest=data["manifest"],
            image_root=data["image_root"],
            model_dir=data["model_dir"],
            report_dir=data["report_dir"],
        )
        cfg.validate()
        return cfg


def _parse_float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then config file values, then CLI overrides; validates all."""
    cfg = RunConfig()
    if path is not None:
        if not os.path.exists(path):
            raise FileNotFoundError(f"config file {path} not found")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}")
        _apply_file(cfg, parser, path)
    if overrides:
        valid = {f.name for f in fields(RunConfig)}
        for key, value in overrides.items():
            if key not in valid:
                raise ConfigError(f"unknown override {key!r}")
            if value is not None:
                setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _apply_file(cfg: RunConfig, parser: configparser.ConfigParser, path) -> None:
    allowed = {"data": _DATA_KEYS, "train": _TRAIN_KEYS,
               "augment": _AUGMENT_KEYS, "map3": _MAP3_KEYS}
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in allowed[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
    try:
        data = parser["data"] if parser.has_section("data") else {}
        train = parser["train"] if parser.has_section("train") else {}
        aug = parser["augment"] if parser.has_section("augment") else {}
        if "manifest" in data:
            cfg.manifest = data["manifest"]
        if "image_root" in data:
            cfg.image_root = data["image_root"]
        if "mode" in data:
            cfg.mode = data["mode"]
        if "classes" in data:
            cfg.classes = int(data["classes"])
        if "patch_h" in data:
            cfg.patch_h = int(data["patch_h"])
        if "patch_w" in data:
            cfg.patch_w = int(data["patch_w"])
        if "subject_split" in data:
            cfg.subject_split = _parse_bool(data["subject_split"])
        if "lr" in train:
            cfg.lr = float(train["lr"])
        if "batch_size" in train:
            cfg.batch_size = int(train["batch_size"])
        if "epochs" in train:
            cfg.epochs = int(train["epochs"])
        if "seed" in train:
            cfg.seed = int(train["seed"])
        if "model_dir" in train:
            cfg.model_dir = train["model_dir"]
        if "report_dir" in train:
            cfg.report_dir = train["report_dir"]
        if "rotations" in aug:
            cfg.rotations = _parse_float_list(aug["rotations"])
        if "sigmas" in aug:
            cfg.sigmas = _parse_float_list(aug["sigmas"])
        if "scales" in aug:
            cfg.scales = _parse_float_list(aug["scales"])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")
    if parser.has_section("map3"):
        map3 = {}
        for key, value in parser["map3"].items():
            token = value.strip().lower()
            if token not in _MAP3_VALUES:
                raise ConfigError(
                    f"{path}: [map3] {key} must be left|center|right|excluded"
                )
            map3[EacClass[key.upper()]] = _MAP3_VALUES[token]
        cfg.map3 = map3
