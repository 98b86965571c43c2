/**
 * Node bindings for the `svgtok` command line interface.
 *
 * Every operation delegates to the CLI — no tokenization, geometry, or
 * training logic lives on this side — so outputs are byte-identical to
 * running the commands by hand, and the core remains the single source of
 * truth. Tokens cross the boundary as strings; documents as SVG text;
 * larger artifacts (vocabularies, matrices) as file paths.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Version of these bindings; the core CLI must report exactly the same. */
export const VERSION = "0.1.0";

/**
 * Error raised when the core reports a failure. `name` carries the core
 * error class (for example `MalformedMarkup`, `ArityViolation`,
 * `UnknownToken`), `UsageError` for bad invocations, or `CliError` when the
 * core produced no structured error line.
 */
export class CoreError extends Error {
  constructor(name: string, message: string) {
    super(message);
    this.name = name;
  }
}

export interface TokenizerOptions {
  /** Path to the CLI executable; defaults to `$SVGTOK_CLI` or `svgtok`. */
  cliPath?: string;
  /** Path to a trained segment vocabulary file (enables composite tokens). */
  segmentVocab?: string;
  /** Canvas size; omit to use the core default or the vocabulary's value. */
  canvas?: number;
  /** Out-of-canvas slack; omit like `canvas`. */
  tolerance?: number;
  /** Skip the construction-time version handshake (for testing only). */
  skipVersionCheck?: boolean;
}

export interface TrainOptions {
  /** Merge budget (number of learned composites). */
  merges: number;
  /** Minimum pair frequency for a merge. */
  minFreq?: number;
}

export interface EmbeddingOptions {
  seed?: number;
  lambdaMu?: number;
  lambdaN?: number;
  wSem?: number;
  wNum?: number;
  rbf?: number;
  polyDegree?: number;
  /** Manifest path; the core defaults to `<output>.manifest.json`. */
  manifest?: string;
  format?: "binary" | "json";
}

const ERROR_LINE = /^error: ([A-Z][A-Za-z]*): ([\s\S]*)$/m;

function runCli(cli: string, args: string[]): Buffer {
  const res = spawnSync(cli, args, { maxBuffer: 1 << 28 });
  if (res.error !== undefined) {
    throw new CoreError("SpawnError", `${cli}: ${res.error.message}`);
  }
  if (res.status !== 0) {
    const stderr = res.stderr.toString("utf8");
    const match = stderr.match(ERROR_LINE);
    if (match !== null) {
      throw new CoreError(match[1], match[2].trim());
    }
    const name = res.status === 2 ? "UsageError" : "CliError";
    throw new CoreError(name, stderr.trim() || `exit status ${res.status}`);
  }
  return res.stdout;
}

/** Run `fn` with a scratch file holding `content`, cleaning up afterwards. */
function withTempFile<T>(
  name: string,
  content: string,
  fn: (path: string) => T
): T {
  const dir = mkdtempSync(join(tmpdir(), "svgtok-"));
  try {
    const path = join(dir, name);
    writeFileSync(path, content);
    return fn(path);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Split the CLI's text token form into individual token strings. */
function splitTokens(text: string): string[] {
  return text.match(/<[^>]*>|[^<]+/g) ?? [];
}

/**
 * Handle to an immutable tokenizer configuration: a CLI executable plus an
 * optional trained segment vocabulary. Instances hold no mutable state, so
 * a single tokenizer may be shared freely across concurrent encode/decode
 * callers; training and embedding runs write files and should not race on
 * the same output paths.
 */
export class BoundTokenizer {
  readonly cliPath: string;
  readonly segmentVocab?: string;
  readonly canvas?: number;
  readonly tolerance?: number;

  constructor(options: TokenizerOptions = {}) {
    this.cliPath = options.cliPath ?? process.env.SVGTOK_CLI ?? "svgtok";
    this.segmentVocab = options.segmentVocab;
    this.canvas = options.canvas;
    this.tolerance = options.tolerance;
    if (options.skipVersionCheck !== true) {
      const core = this.version();
      if (core !== VERSION) {
        throw new CoreError(
          "VersionMismatch",
          `core reports ${core}, bindings are ${VERSION}`
        );
      }
    }
  }

  /** Core version string as reported by `svgtok --version`. */
  version(): string {
    return runCli(this.cliPath, ["--version"])
      .toString("utf8")
      .trim()
      .replace(/^svgtok\s+/, "");
  }

  private geometryArgs(): string[] {
    const args: string[] = [];
    if (this.canvas !== undefined) args.push("--canvas", String(this.canvas));
    if (this.tolerance !== undefined) {
      args.push("--tolerance", String(this.tolerance));
    }
    return args;
  }

  private segmentArgs(): string[] {
    return this.segmentVocab === undefined
      ? []
      : ["--segments", this.segmentVocab];
  }

  /**
   * Tokenize one SVG document. Returns the token strings whose
   * concatenation is exactly the CLI's text-form output line.
   */
  encode(svgText: string): string[] {
    const out = withTempFile("sample.svg", svgText, (path) =>
      runCli(this.cliPath, [
        "encode",
        path,
        "--format",
        "text",
        ...this.segmentArgs(),
        ...this.geometryArgs(),
      ])
    );
    return splitTokens(out.toString("utf8").replace(/\n$/, ""));
  }

  /**
   * Decode tokens (an array from {@link encode}, or raw text form) back to
   * canonical SVG text, exactly as the CLI prints it.
   */
  decode(tokens: string[] | string): string {
    const text = Array.isArray(tokens) ? tokens.join("") : tokens;
    const out = withTempFile("sample.tokens", text, (path) =>
      runCli(this.cliPath, [
        "decode",
        path,
        "--format",
        "text",
        ...this.segmentArgs(),
        ...this.geometryArgs(),
      ])
    );
    return out.toString("utf8");
  }

  /**
   * Learn a segment vocabulary from SVG files and write it to
   * `outputPath`. Returns `outputPath`.
   */
  train(corpusPaths: string[], outputPath: string, options: TrainOptions): string {
    const list = corpusPaths.join("\n") + "\n";
    withTempFile("corpus.list", list, (path) =>
      runCli(this.cliPath, [
        "train-segments",
        path,
        "-o",
        outputPath,
        "--merges",
        String(options.merges),
        "--min-freq",
        String(options.minFreq ?? 2),
        ...this.geometryArgs(),
      ])
    );
    return outputPath;
  }

  /**
   * Initialize embeddings for the vocabulary (plus composites when this
   * tokenizer carries a segment vocabulary) from a base embedding table
   * file. Writes the matrix to `outputPath` and returns it.
   */
  initEmbeddings(
    baseTablePath: string,
    outputPath: string,
    options: EmbeddingOptions = {}
  ): string {
    const args = [
      "init-embeddings",
      "--base-table",
      baseTablePath,
      "-o",
      outputPath,
      ...this.segmentArgs(),
      ...this.geometryArgs(),
    ];
    const flags: Array<[string, number | string | undefined]> = [
      ["--seed", options.seed],
      ["--lambda-mu", options.lambdaMu],
      ["--lambda-n", options.lambdaN],
      ["--w-sem", options.wSem],
      ["--w-num", options.wNum],
      ["--rbf", options.rbf],
      ["--poly-degree", options.polyDegree],
      ["--manifest", options.manifest],
      ["--format", options.format],
    ];
    for (const [flag, value] of flags) {
      if (value !== undefined) args.push(flag, String(value));
    }
    runCli(this.cliPath, args);
    return outputPath;
  }
}
