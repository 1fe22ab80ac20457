"""Write a synthetic world to disk as a complete, runnable pipeline input."""
from __future__ import annotations

from pathlib import Path

from .embedding_store import save_pos, save_space
from .evaluation import save_gold
from .labeling import save_bigrams, save_cooc
from .synthetic import bimodal_world

SMALL = dict(n_adj=40, n_noun=60, d_word=20, d_visual=20, images_per_noun=6, test_images_per_noun=2)

CONFIG_TEMPLATE = """\
; synthetic pipeline inputs (seed {seed})
[run]
seed = {seed}
output_dir = out

[data]
words = words.txt
words_pos = words.pos
word_freq = words.freq
train_images = train_images.txt
train_pairs = train_pairs.tsv
phrases = phrases.txt
triples = triples.tsv
test_images = test_images.txt
gold = gold.tsv
bigrams = bigrams.txt
cooc = cooc.tsv
concreteness = concreteness.tsv
class_images = class_images.txt
class_labels = class_labels.tsv

[projection]
method = ridge

[annotate]
mode = dec
k = 50

[evaluate]
ks = 1,5,10,20,50
auc = true
concreteness = true

[represent]
target_dim = {target_dim}
reg = 0.01
epochs = 50
"""


def write_fixtures(out, seed: int = 0, small: bool = False, n_classes: int = 3, n_per_class: int = 20) -> Path:
    """Generate a world with :func:`bimodal_world` and write every input
    file plus ``config.ini`` into ``out``; returns the config path."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    world = bimodal_world(seed=seed, **(SMALL if small else {}))
    ws = world.word_space

    save_space(ws, out / "words.txt")
    save_pos(ws.pos, out / "words.pos")
    with open(out / "words.freq", "w", encoding="utf-8", newline="\n") as fh:
        for label in ws.labels:
            fh.write(f"{label}\t{ws.frequency_rank[label]}\n")
    save_space(world.train_images, out / "train_images.txt")
    with open(out / "train_pairs.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for iid, label in world.train_pairs:
            fh.write(f"{iid}\t{label}\n")
    save_space(world.phrase_space, out / "phrases.txt")
    with open(out / "triples.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for t in world.triples:
            fh.write("\t".join(t) + "\n")
    save_space(world.test_images, out / "test_images.txt")
    save_gold(world.gold, out / "gold.tsv")
    save_bigrams(world.bigrams, out / "bigrams.txt")
    save_cooc(world.cooc, out / "cooc.tsv")
    with open(out / "concreteness.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for noun, score in world.concreteness.items():
            fh.write(f"{noun}\t{score!r}\n")

    classes = world.test_nouns[:n_classes]
    images, labels = world.classification_set(classes, n_per_class, seed=seed + 1)
    save_space(images, out / "class_images.txt")
    n_train = int(round(0.7 * n_per_class))
    with open(out / "class_labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i, (iid, label) in enumerate(zip(images.labels, labels)):
            split = "train" if i % n_per_class < n_train else "test"
            fh.write(f"{iid}\t{label}\t{split}\n")

    target_dim = min(20, n_classes * n_train)
    path = out / "config.ini"
    path.write_text(CONFIG_TEMPLATE.format(seed=seed, target_dim=target_dim), encoding="utf-8")
    return path
