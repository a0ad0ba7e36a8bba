/** Thin fetch wrapper over the erase service JSON API. */

import { ApiError } from "./types.js";
import type { ApiClient, MutationResponse, ScenePayload } from "./types.js";

async function readError(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${resp.status}`;
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) throw new ApiError(await readError(resp), resp.status);
  return (await resp.json()) as T;
}

async function postJson<T>(url: string, body: unknown): Promise<T> {
  const resp = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body ?? {}),
  });
  if (!resp.ok) throw new ApiError(await readError(resp), resp.status);
  return (await resp.json()) as T;
}

export class HttpApiClient implements ApiClient {
  getScene(): Promise<ScenePayload> {
    return getJson<ScenePayload>("/api/scene");
  }

  erase(ids: string[]): Promise<MutationResponse> {
    return postJson<MutationResponse>("/api/erase", { ids });
  }

  restore(ids: string[]): Promise<MutationResponse> {
    return postJson<MutationResponse>("/api/restore", { ids });
  }

  undo(): Promise<MutationResponse> {
    return postJson<MutationResponse>("/api/undo", {});
  }

  async fetchImage(url: string): Promise<Uint8Array> {
    const resp = await fetch(url);
    if (!resp.ok) throw new ApiError(await readError(resp), resp.status);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
