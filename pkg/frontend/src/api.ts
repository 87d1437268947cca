/** HTTP client for the segmentation service. */

import type { Run } from "./rle.js";

export interface RegionInfo {
  label: number;
  pixel_count: number;
  bbox: [number, number, number, number];
  centroid: [number, number];
}

export interface UploadResult {
  key: string;
  width: number;
  height: number;
  objects: RegionInfo[];
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly code: string, message: string) {
    super(message);
  }
}

async function raise(resp: Response): Promise<never> {
  let code = "error";
  let message = `${resp.status}`;
  try {
    const body = await resp.json();
    code = body.error ?? code;
    message = body.message ?? message;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(resp.status, code, message);
}

export class ServiceClient {
  constructor(readonly baseUrl: string = "") {}

  newClientUuid(): string {
    return crypto.randomUUID();
  }

  async upload(file: Blob, fileName: string, clientUuid: string,
               detector?: string): Promise<UploadResult> {
    const form = new FormData();
    form.append("file", file, fileName);
    form.append("client_uuid", clientUuid);
    const query = detector ? `?detector=${encodeURIComponent(detector)}` : "";
    const resp = await fetch(`${this.baseUrl}/api/v1/images${query}`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async fetchFrame(key: string): Promise<ArrayBuffer> {
    const resp = await fetch(`${this.baseUrl}/api/v1/frame/${key}`);
    if (!resp.ok) await raise(resp);
    return resp.arrayBuffer();
  }

  async postMask(key: string, width: number, height: number,
                 threshold: number, dilation: number, runs: Run[]): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/api/v1/mask/${key}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ width, height, threshold, dilation, runs }),
    });
    if (!resp.ok) await raise(resp);
  }

  async download(key: string): Promise<ArrayBuffer> {
    const resp = await fetch(`${this.baseUrl}/api/v1/download/${key}`);
    if (!resp.ok) await raise(resp);
    return resp.arrayBuffer();
  }
}
