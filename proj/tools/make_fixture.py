#!/usr/bin/env python3
"""Regenerates the bundled test corpus and its side files under tests/data.

Output is a pure function of --seed, so the checked-in files can be rebuilt
byte-for-byte.
"""

import argparse
import json
import pathlib
import random

STEMS = [
    "karar", "mahkeme", "dava", "davacı", "davalı", "hüküm", "temyiz", "istinaf", "kanun",
    "madde", "yönetmelik", "tebliğ", "sözleşme", "tazminat", "alacak", "borç", "miras",
    "tereke", "vasiyet", "tapu", "taşınmaz", "kira", "işçi", "işveren", "kıdem", "ihbar",
    "fesih", "icra", "iflas", "haciz", "ceza", "sanık", "müşteki", "tanık", "bilirkişi",
    "delil", "gerekçe", "itiraz", "başvuru", "idare", "vergi", "ruhsat", "imar", "belediye",
    "anayasa", "hak", "özgürlük", "mülkiyet", "zilyetlik", "ipotek", "rehin", "kefalet",
    "velayet", "nafaka", "boşanma", "evlilik", "şirket", "ortaklık", "pay", "senet",
]
SUFFIXES = [
    "", "", "", "ın", "in", "un", "ün", "ı", "i", "u", "ü", "a", "e", "da", "de", "dan", "den",
    "lar", "ler", "ları", "leri", "ların", "lerin", "ına", "ine", "ında", "inde", "ından",
    "inden", "ıyla", "iyle", "sı", "si", "nın", "nin",
]
FUNCTION = ["ve", "ile", "bu", "bir", "olarak", "olan", "gereği", "nedeniyle", "göre", "için",
            "ancak", "ise", "de", "da", "gibi", "kadar", "sonra", "önce", "hakkında"]
VERBS = ["verildi", "edildi", "bozulmasına", "onanmasına", "reddine", "kabulüne", "karar verildi",
         "oybirliğiyle karar verildi", "gereği düşünüldü", "incelendi", "anlaşıldı", "tespit edildi"]
NAMES = ["İçtihadı", "Birleştirme", "Kararı", "Yargıtay", "Danıştay", "İstanbul", "Ankara",
         "İzmir", "Türk", "Medeni", "Borçlar", "Kanunu", "Hukuk", "Dairesi", "Genel", "Kurulu"]

GROUPS = [
    # (field, content, topic, share of documents)
    ("İÇTİHAT", "Yargıtay", None, 0.40),
    ("İÇTİHAT", "Danıştay", None, 0.12),
    ("İÇTİHAT", "İstinaf", None, 0.08),
    ("MEVZUAT", "MEVZUAT", "KANUN", 0.10),
    ("MEVZUAT", "MEVZUAT", "YÖNETMELİK", 0.06),
    ("HUKUK", "MAKALE", "CEZA", 0.08),
    ("HUKUK", "TEZ", "GENEL", 0.06),
    ("HUKUK DIŞI", "WIKI", "GENEL", 0.10),
]

SEED_TERMS = ["İçtihadı", "Birleştirme", "Kararı", "tereke", "mirasbırakan", "zilyetlik",
              "kıdem tazminatı", "Kanun Hükmünde Kararname", "istinaf", "bilirkişi"]
KEYWORDS = ["tereke", "zilyetlik", "kıdem tazminatı", "temyiz", "bilirkişi raporu", "ipotek",
            "nafaka", "haciz", "velayet", "İçtihadı Birleştirme Kararı"]


def word(rng):
    r = rng.random()
    if r < 0.25:
        return rng.choice(FUNCTION)
    if r < 0.32:
        return rng.choice(NAMES)
    stem = rng.choice(STEMS)
    return stem + rng.choice(SUFFIXES)


def sentence(rng):
    n = rng.randint(6, 18)
    words = [word(rng) for _ in range(n)]
    if rng.random() < 0.15:
        words.insert(rng.randrange(len(words)), rng.choice(KEYWORDS))
    words.append(rng.choice(VERBS) + ".")
    words[0] = words[0][:1].upper() + words[0][1:]
    return " ".join(words)


def document_text(rng, sentences):
    lines = []
    for _ in range(rng.randint(2, 6)):
        lines.append(" ".join(sentence(rng) for _ in range(max(1, sentences // 3))))
    return "\n".join(lines)


def make_corpus(rng, target_bytes):
    docs = []
    size = 0
    weights = [g[3] for g in GROUPS]
    i = 0
    while size < target_bytes:
        field, content, topic, _ = rng.choices(GROUPS, weights)[0]
        text = document_text(rng, rng.randint(3, 12))
        doc = {"id": f"doc-{i:05d}", "field": field, "content": content, "topic": topic, "text": text}
        docs.append(doc)
        size += len(text.encode("utf-8"))
        i += 1
        # Plant a near-duplicate now and then: one character changed.
        if rng.random() < 0.05 and len(text) > 40:
            pos = rng.randrange(len(text))
            dup = text[:pos] + ("x" if text[pos] != "x" else "y") + text[pos + 1:]
            docs.append({"id": f"doc-{i:05d}", "field": field, "content": content, "topic": topic, "text": dup})
            size += len(dup.encode("utf-8"))
            i += 1
    rng.shuffle(docs)
    return docs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"))
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--bytes", type=int, default=1_000_000)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    docs = make_corpus(rng, args.bytes)
    with open(out / "corpus.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")

    (out / "seed_terms.txt").write_text("\n".join(SEED_TERMS) + "\n", encoding="utf-8")
    (out / "keywords.txt").write_text("\n".join(KEYWORDS) + "\n", encoding="utf-8")

    sizes = {}
    for d in docs:
        key = "/".join(x for x in (d["field"], d["content"], d["topic"]) if x is not None)
        sizes[key] = sizes.get(key, 0) + len(d["text"].encode("utf-8"))
    # Shrink the largest court group, grow the scholarly groups.
    targets = {
        "İÇTİHAT/Yargıtay": int(sizes["İÇTİHAT/Yargıtay"] * 0.25),
        "HUKUK/MAKALE/CEZA": int(sizes["HUKUK/MAKALE/CEZA"] * 2.5),
        "HUKUK/TEZ/GENEL": int(sizes["HUKUK/TEZ/GENEL"] * 1.5),
    }
    (out / "targets.json").write_text(json.dumps(targets, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
