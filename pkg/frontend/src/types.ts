/** Shapes exchanged with the erase service; mirrors its JSON contract. */

export interface SceneInstance {
  id: string;
  label: string;
  /** [x, y, width, height] in image pixels. */
  bbox: [number, number, number, number];
  /** Simplified boundary polygon as [x, y] vertices. */
  outline: number[][];
}

export interface ScenePayload {
  instances: SceneInstance[];
  planes: { id: string; kind: string }[];
  image_url: string;
  width: number;
  height: number;
  erased: string[];
}

export interface MutationResponse {
  image_url: string;
  timings: Record<string, number>;
  cached: boolean;
  erased: string[];
}

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Transport used by the controller; the real client wraps fetch, tests wrap a fake. */
export interface ApiClient {
  getScene(): Promise<ScenePayload>;
  erase(ids: string[]): Promise<MutationResponse>;
  restore(ids: string[]): Promise<MutationResponse>;
  undo(): Promise<MutationResponse>;
  fetchImage(url: string): Promise<Uint8Array>;
}
