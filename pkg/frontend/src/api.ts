/**
 * HTTP client for the relighting service.
 *
 * One relight request is in flight at a time: a newer request aborts a
 * pending one. Network failures retry once; the last response's ETag is
 * sent back so an unchanged payload resolves from the local cache via
 * 304 without re-downloading the image.
 */

import type { ScribbleRaster } from "./raster.js";

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
}

export interface RelightDiagnostics {
  iterations: number;
  residual: number;
  elapsedMs: number;
}

export interface RelightResult {
  blob: Blob;
  etag: string | null;
  diagnostics: RelightDiagnostics;
  fromCache: boolean;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface SessionParts {
  image: Blob;
  normals: Blob;
  subject_mask: Blob;
  skin_mask?: Blob;
  albedo?: Blob;
}

type FetchLike = typeof fetch;

export class RelightClient {
  private inflight: AbortController | null = null;
  private lastEtag: string | null = null;
  private lastResult: RelightResult | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = fetch,
  ) {}

  async createSession(parts: SessionParts): Promise<SessionInfo> {
    const form = new FormData();
    form.append("image", parts.image, "image.png");
    form.append("normals", parts.normals, "normals.pfm");
    form.append("subject_mask", parts.subject_mask, "subject.png");
    if (parts.skin_mask) form.append("skin_mask", parts.skin_mask, "skin.png");
    if (parts.albedo) form.append("albedo", parts.albedo, "albedo.pfm");
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/sessions`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) throw new ApiError(resp.status, await describeError(resp));
    return (await resp.json()) as SessionInfo;
  }

  /**
   * Relight from the full current scribble raster. Supersedes any
   * pending request. Resolves null when superseded.
   */
  async relight(
    sessionId: string,
    scribble: ScribbleRaster,
    skinTone: string | null = null,
    params: Record<string, number> | null = null,
  ): Promise<RelightResult | null> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const body = JSON.stringify({
      schema_version: 1,
      scribble,
      ...(skinTone ? { skin_tone: skinTone } : {}),
      ...(params ? { params } : {}),
    });
    const doFetch = () =>
      this.fetchImpl(`${this.baseUrl}/v1/sessions/${sessionId}/relight`, {
        method: "POST",
        headers: {
          "content-type": "application/json",
          ...(this.lastEtag ? { "if-none-match": this.lastEtag } : {}),
        },
        body,
        signal: controller.signal,
      });

    let resp: Response;
    try {
      resp = await doFetch();
    } catch (err) {
      if (controller.signal.aborted) return null;
      resp = await doFetch(); // one retry on network failure
    }
    if (controller.signal.aborted) return null;

    if (resp.status === 304 && this.lastResult) {
      return { ...this.lastResult, fromCache: true };
    }
    if (!resp.ok) throw new ApiError(resp.status, await describeError(resp));
    const diagnostics: RelightDiagnostics = {
      iterations: Number(resp.headers.get("x-relight-iterations") ?? 0),
      residual: Number(resp.headers.get("x-relight-residual") ?? 0),
      elapsedMs: Number(resp.headers.get("x-relight-elapsed-ms") ?? 0),
    };
    const result: RelightResult = {
      blob: await resp.blob(),
      etag: resp.headers.get("etag"),
      diagnostics,
      fromCache: false,
    };
    this.lastEtag = result.etag;
    this.lastResult = result;
    return result;
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.fetchImpl(`${this.baseUrl}/v1/sessions/${sessionId}`, {
      method: "DELETE",
    });
  }
}

async function describeError(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return body.error ?? JSON.stringify(body);
  } catch {
    return `${resp.status} ${resp.statusText}`;
  }
}
