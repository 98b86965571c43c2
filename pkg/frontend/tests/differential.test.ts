/**
 * Differential suite: every binding operation must produce byte-identical
 * artifacts to invoking the CLI directly on the same inputs, across a
 * 200-sample deterministic corpus, and core error names must surface on
 * thrown errors unchanged.
 */

import { spawnSync } from "node:child_process";
import {
  mkdirSync,
  mkdtempSync,
  readFileSync,
  rmSync,
  writeFileSync,
} from "node:fs";
import { tmpdir } from "node:os";
import { basename, join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { BoundTokenizer, CoreError, VERSION } from "../src/index.js";

const CLI = process.env.SVGTOK_CLI ?? "svgtok";
const SAMPLES = 200;
const FIXTURES = join(fileURLToPath(new URL(".", import.meta.url)), "fixtures");

/** Deterministic 32-bit PRNG so the corpus is stable across runs. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const FILLS = ["#e74c3c", "#3498db", "#2ecc71", "#f1c40f", "crimson", "steelblue"];

// Literal command chunks with bounded drift; reused verbatim so segment
// merges fire on this corpus.
const MOTIFS = [
  "l 30 -20 l 30 20",
  "h 40 v 40 h -40",
  "c 12 -18 24 -18 36 0",
  "q 15 -25 30 0",
];

function icon(rand: () => number): string {
  const pick = <T>(xs: T[]): T => xs[Math.floor(rand() * xs.length)];
  const x = 80 + Math.floor(rand() * 16) * 4;
  const y = 80 + Math.floor(rand() * 30) * 4;
  const n = 2 + Math.floor(rand() * 9);
  let d = `M ${x} ${y}`;
  for (let i = 0; i < n; i++) d += " " + pick(MOTIFS);
  if (rand() < 0.8) d += " z";
  const stroke =
    rand() < 0.3 ? ` stroke="${pick(FILLS)}" stroke-width="${1 + Math.floor(rand() * 3)}"` : "";
  let body = `<path fill="${pick(FILLS)}"${stroke} d="${d}"/>`;
  if (rand() < 0.3) {
    const tx = 4 + Math.floor(rand() * 5) * 4;
    body = `<g transform="translate(${tx}, ${tx})">${body}</g>`;
  }
  return `<svg viewBox="0 0 784 784">${body}</svg>`;
}

function cli(args: string[]): Buffer {
  const res = spawnSync(CLI, args, { maxBuffer: 1 << 28 });
  if (res.status !== 0) {
    throw new Error(`cli ${args.join(" ")} failed: ${res.stderr.toString("utf8")}`);
  }
  return res.stdout;
}

let work: string;
let corpusDir: string;
let corpusFiles: string[];
let segVocabPath: string;

beforeAll(() => {
  work = mkdtempSync(join(tmpdir(), "svgtok-diff-"));
  corpusDir = join(work, "corpus");
  mkdirSync(corpusDir);
  const rand = mulberry32(20260815);
  corpusFiles = [];
  for (let i = 0; i < SAMPLES; i++) {
    const path = join(corpusDir, `sample_${String(i).padStart(3, "0")}.svg`);
    writeFileSync(path, icon(rand));
    corpusFiles.push(path);
  }
  // Reference segment vocabulary straight from the CLI.
  segVocabPath = join(work, "segments.json");
  cli(["train-segments", corpusDir, "-o", segVocabPath, "--merges", "80", "--min-freq", "2"]);
}, 120_000);

afterAll(() => {
  rmSync(work, { recursive: true, force: true });
});

describe("version handshake", () => {
  it("matches the core version exactly", () => {
    const tok = new BoundTokenizer();
    expect(tok.version()).toBe(VERSION);
    const manifest = JSON.parse(
      readFileSync(join(FIXTURES, "..", "..", "package.json"), "utf8")
    ) as { version: string };
    expect(manifest.version).toBe(VERSION);
  });

  it("rejects a core reporting a different version", () => {
    const fake = join(work, "fake-svgtok.sh");
    writeFileSync(fake, '#!/bin/sh\necho "svgtok 9.9.9"\n', { mode: 0o755 });
    let caught: unknown;
    try {
      new BoundTokenizer({ cliPath: fake });
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(CoreError);
    expect((caught as CoreError).name).toBe("VersionMismatch");
  });
});

describe("encode/decode differential over the corpus", () => {
  it(
    "atomic encode, decode, and round trip are byte-identical to the CLI",
    () => {
      const tok = new BoundTokenizer({ skipVersionCheck: true });
      const encodedDir = join(work, "enc-atomic");
      const decodedDir = join(work, "dec-atomic");
      const cleanDir = join(work, "clean-atomic");
      cli(["encode", corpusDir, "-o", encodedDir, "--format", "text"]);
      cli(["decode", encodedDir, "-o", decodedDir, "--format", "text"]);
      cli(["preprocess", corpusDir, "-o", cleanDir]);

      for (const file of corpusFiles) {
        const stem = basename(file, ".svg");
        const svgText = readFileSync(file, "utf8");
        const tokens = tok.encode(svgText);

        const cliTokens = readFileSync(join(encodedDir, `${stem}.tokens`));
        expect(Buffer.from(tokens.join("") + "\n", "utf8").equals(cliTokens)).toBe(true);

        const decoded = tok.decode(tokens);
        const cliDecoded = readFileSync(join(decodedDir, `${stem}.svg`));
        expect(Buffer.from(decoded, "utf8").equals(cliDecoded)).toBe(true);

        // Decoding an encode is the canonical serialization of the sample.
        const canonical = readFileSync(join(cleanDir, `${stem}.svg`));
        expect(Buffer.from(decoded, "utf8").equals(canonical)).toBe(true);
      }
    },
    600_000
  );

  it(
    "segment-level encode and decode are byte-identical to the CLI",
    () => {
      const tok = new BoundTokenizer({
        segmentVocab: segVocabPath,
        skipVersionCheck: true,
      });
      const encodedDir = join(work, "enc-seg");
      const decodedDir = join(work, "dec-seg");
      cli(["encode", corpusDir, "-o", encodedDir, "--format", "text", "--segments", segVocabPath]);
      cli(["decode", encodedDir, "-o", decodedDir, "--format", "text", "--segments", segVocabPath]);

      let composites = 0;
      for (const file of corpusFiles) {
        const stem = basename(file, ".svg");
        const tokens = tok.encode(readFileSync(file, "utf8"));
        composites += tokens.filter((t) => t.startsWith("<seg_")).length;

        const cliTokens = readFileSync(join(encodedDir, `${stem}.tokens`));
        expect(Buffer.from(tokens.join("") + "\n", "utf8").equals(cliTokens)).toBe(true);

        const decoded = tok.decode(tokens);
        const cliDecoded = readFileSync(join(decodedDir, `${stem}.svg`));
        expect(Buffer.from(decoded, "utf8").equals(cliDecoded)).toBe(true);
      }
      // The corpus is motif-heavy; merges must actually fire somewhere.
      expect(composites).toBeGreaterThan(0);
    },
    600_000
  );
});

describe("training differential", () => {
  it("binding train output is byte-identical to a direct CLI run", () => {
    const tok = new BoundTokenizer({ skipVersionCheck: true });
    const viaBinding = tok.train(corpusFiles, join(work, "train-binding.json"), {
      merges: 80,
      minFreq: 2,
    });
    const direct = join(work, "train-direct.json");
    const listPath = join(work, "train-direct.list");
    writeFileSync(listPath, corpusFiles.join("\n") + "\n");
    cli(["train-segments", listPath, "-o", direct, "--merges", "80", "--min-freq", "2"]);
    expect(readFileSync(viaBinding).equals(readFileSync(direct))).toBe(true);
    // Directory input in sorted order saw the same corpus: same vocabulary.
    expect(readFileSync(viaBinding).equals(readFileSync(segVocabPath))).toBe(true);
  }, 120_000);
});

describe("embedding initialization differential", () => {
  it("binding output matrix and manifest match a direct CLI run", () => {
    const base = join(FIXTURES, "base_table.bin");
    const tok = new BoundTokenizer({
      segmentVocab: segVocabPath,
      skipVersionCheck: true,
    });
    const viaBinding = tok.initEmbeddings(base, join(work, "emb-binding.bin"), {
      seed: 3,
    });
    const direct = join(work, "emb-direct.bin");
    cli([
      "init-embeddings",
      "--base-table",
      base,
      "-o",
      direct,
      "--segments",
      segVocabPath,
      "--seed",
      "3",
    ]);
    expect(readFileSync(viaBinding).equals(readFileSync(direct))).toBe(true);
    expect(
      readFileSync(`${viaBinding}.manifest.json`).equals(
        readFileSync(`${direct}.manifest.json`)
      )
    ).toBe(true);
  }, 120_000);
});

describe("core error names surface intact", () => {
  const tok = () => new BoundTokenizer({ skipVersionCheck: true });

  it.each([
    ["MalformedMarkup", () => tok().encode('<svg viewBox="0 0 784 784"><path d="M 10')],
    [
      "ArityViolation",
      () =>
        tok().decode(
          "<svg>viewBox=0 0 784 784<path><cmd_M><P_100><P_200><cmd_l><d_5></path></svg>"
        ),
    ],
    ["UnknownToken", () => tok().decode("<zzz_9>")],
    [
      "UnknownToken",
      () =>
        // Composite token without a segment vocabulary loaded.
        tok().decode("<svg>viewBox=0 0 784 784<path><seg_0></path></svg>"),
    ],
    ["UsageError", () => tok().train(["x.svg"], join(work, "t.json"), { merges: -1 })],
  ])("%s", (name, trigger) => {
    let caught: unknown;
    try {
      trigger();
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(CoreError);
    expect((caught as CoreError).name).toBe(name);
  });

  it("missing executables raise SpawnError", () => {
    let caught: unknown;
    try {
      new BoundTokenizer({ cliPath: "/nonexistent/svgtok", skipVersionCheck: true }).version();
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(CoreError);
    expect((caught as CoreError).name).toBe("SpawnError");
  });
});
