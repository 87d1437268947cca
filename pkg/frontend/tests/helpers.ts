/** Test utilities: golden suite generation, a live backend, FITS digging. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { existsSync, readFileSync } from "node:fs";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));
const REPO_ROOT = resolve(HERE, "..", "..");
const PY_ENV = {
  ...process.env,
  PYTHONPATH: join(REPO_ROOT, "src"),
};

export function generateGoldenSuite(outDir: string): void {
  const result = spawnSync(
    "python3", ["-m", "tinyseg.cli", "golden", "-o", outDir],
    { env: PY_ENV, encoding: "utf8" },
  );
  if (result.status !== 0) {
    throw new Error(`golden generation failed: ${result.stderr}`);
  }
}

export interface GoldenCase {
  name: string;
  params: {
    curve: "linear" | "log" | "sqrt";
    limits_mode: "zscale" | "minmax" | "manual";
    manual_limits: [number, number] | null;
    raw_clip: [number, number] | null;
    sigma_k: number;
    threshold: number;
    dilation: number;
    overlay_runs: Array<[number, number, number]>;
    width: number;
    height: number;
  };
  image: ArrayBuffer;
  prob: ArrayBuffer;
  display: Uint8Array;
  mask: Uint8Array;
}

export function loadGoldenCases(dir: string): GoldenCase[] {
  const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf8"));
  return manifest.cases.map((name: string) => {
    const caseDir = join(dir, name);
    const read = (file: string) => {
      const buf = readFileSync(join(caseDir, file));
      return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
    };
    return {
      name,
      params: JSON.parse(readFileSync(join(caseDir, "params.json"), "utf8")),
      image: read("image.npy"),
      prob: read("prob.npy"),
      display: new Uint8Array(read("display.bin")),
      mask: new Uint8Array(read("mask.bin")),
    };
  });
}

export interface LiveServer {
  baseUrl: string;
  stop: () => Promise<void>;
}

export async function startServer(): Promise<LiveServer> {
  const tempRoot = await mkdtemp(join(tmpdir(), "tinyseg-test-"));
  const child: ChildProcess = spawn(
    "python3", ["-m", "tinyseg.cli", "serve", "--port", "0"],
    { env: { ...PY_ENV, TMPDIR: tempRoot }, stdio: ["ignore", "pipe", "pipe"] },
  );
  const port = await new Promise<number>((resolvePort, reject) => {
    const timer = setTimeout(() => reject(new Error("server start timeout")), 30_000);
    let buffer = "";
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = /http:\/\/[\d.]+:(\d+)/.exec(buffer);
      if (match) {
        clearTimeout(timer);
        resolvePort(parseInt(match[1], 10));
      }
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code})`));
    });
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  // wait until it answers
  for (let i = 0; i < 100; i++) {
    try {
      await fetch(`${baseUrl}/api/v1/frame/${"0".repeat(32)}`);
      break;
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  return {
    baseUrl,
    stop: async () => {
      child.kill("SIGINT");
      await new Promise((r) => setTimeout(r, 300));
      child.kill("SIGKILL");
      await rm(tempRoot, { recursive: true, force: true });
    },
  };
}

export function goldenDir(): string {
  const dir = join(HERE, "..", ".golden");
  if (!existsSync(join(dir, "manifest.json"))) {
    generateGoldenSuite(dir);
  }
  return dir;
}

/** Pull a named IMAGE extension's 8-bit data out of serialized FITS. */
export function extractMaskExtension(
  fits: Uint8Array,
  extName: string,
): { width: number; height: number; data: Uint8Array } {
  const BLOCK = 2880;
  const text = (offset: number, length: number) =>
    new TextDecoder("ascii").decode(fits.subarray(offset, offset + length));
  let offset = 0;
  while (offset < fits.length) {
    // read one header
    const cards: Record<string, string> = {};
    let pos = offset;
    let foundEnd = false;
    while (pos < fits.length && !foundEnd) {
      for (let i = 0; i < BLOCK; i += 80) {
        const card = text(pos + i, 80);
        const key = card.slice(0, 8).trim();
        if (key === "END") {
          foundEnd = true;
          break;
        }
        if (card.slice(8, 10) === "= ") cards[key] = card.slice(10).trim();
      }
      pos += BLOCK;
    }
    if (!foundEnd) throw new Error("no END card");
    const bitpix = parseInt(cards["BITPIX"] ?? "0", 10);
    const naxis = parseInt(cards["NAXIS"] ?? "0", 10);
    let npix = naxis > 0 ? 1 : 0;
    for (let i = 1; i <= naxis; i++) {
      npix *= parseInt(cards[`NAXIS${i}`] ?? "0", 10);
    }
    const gcount = parseInt(cards["GCOUNT"] ?? "1", 10);
    const pcount = parseInt(cards["PCOUNT"] ?? "0", 10);
    const dataBytes = (Math.abs(bitpix) / 8) * gcount * (pcount + npix);
    const padded = Math.ceil(dataBytes / BLOCK) * BLOCK;
    const name = (cards["EXTNAME"] ?? "").replace(/'/g, "").trim();
    if (name === extName) {
      if (bitpix !== 8 || naxis !== 2) throw new Error("unexpected mask encoding");
      const width = parseInt(cards["NAXIS1"], 10);
      const height = parseInt(cards["NAXIS2"], 10);
      return { width, height, data: fits.subarray(pos, pos + width * height) };
    }
    offset = pos + padded;
  }
  throw new Error(`extension ${extName} not found`);
}
