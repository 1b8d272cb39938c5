import pytest

from simpserve.training import Checkpoint, TrainPair, TrainSettings, finetune

TEN_PAIRS = [
    TrainPair(
        doc_id=f"fix-{i}",
        input_text=(
            f"trials included</s>{c} improved</s>"
            f"We included {i + 2} trials of {t} for {c}. "
            f"Results showed {c} improved with {t}."
        ),
        target_text=f"This review found {t} improved {c} in {i + 2} trials.",
    )
    for i, (t, c) in enumerate(
        [
            ("exercise", "pain"), ("massage", "stiffness"), ("splinting", "mobility"),
            ("hydration", "recovery"), ("stretching", "sleep"), ("ibuprofen", "swelling"),
            ("acupuncture", "headache"), ("vaccination", "infection"),
            ("compression", "bruising"), ("elevation", "numbness"),
        ]
    )
]


def small_settings(**overrides) -> TrainSettings:
    defaults = dict(
        steps=50, batch_size=4, learning_rate=3e-3, seed=42,
        normalization="input_length", max_positions=48, d_model=32,
        n_layers=1, dim_feedforward=64,
    )
    defaults.update(overrides)
    return TrainSettings(**defaults)


@pytest.fixture(scope="session")
def trained_checkpoint(tmp_path_factory) -> tuple[Checkpoint, str]:
    checkpoint = finetune(TEN_PAIRS, small_settings())
    path = tmp_path_factory.mktemp("ckpt") / "model.pt"
    checkpoint.save(path)
    return checkpoint, str(path)
