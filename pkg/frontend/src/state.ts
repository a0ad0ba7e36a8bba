/** UI state as a pure reducer.
 *
 * State is a function of the last server acknowledgment plus in-flight
 * flags; reloading the page and replaying `scene-loaded` reconstructs it.
 * All transitions await the server (no optimistic updates), so `busy`
 * gates every mutation.
 */

import type { MutationResponse, SceneInstance, ScenePayload } from "./types.js";

export interface UiState {
  loaded: boolean;
  instances: SceneInstance[];
  erased: string[];
  busy: boolean;
  originalImageUrl: string;
  currentImageUrl: string;
  width: number;
  height: number;
  /** Last failure to surface as a toast; cleared by the next event. */
  error: string | null;
}

export type UiEvent =
  | { type: "scene-loaded"; payload: ScenePayload }
  | { type: "mutation-started" }
  | { type: "mutation-acknowledged"; response: MutationResponse }
  | { type: "mutation-failed"; message: string };

export function initialState(): UiState {
  return {
    loaded: false,
    instances: [],
    erased: [],
    busy: false,
    originalImageUrl: "",
    currentImageUrl: "",
    width: 0,
    height: 0,
    error: null,
  };
}

export function reduce(state: UiState, event: UiEvent): UiState {
  switch (event.type) {
    case "scene-loaded":
      return {
        ...state,
        loaded: true,
        instances: event.payload.instances,
        erased: [...event.payload.erased],
        originalImageUrl: event.payload.image_url,
        currentImageUrl: event.payload.erased.length ? "/api/image/current" : event.payload.image_url,
        width: event.payload.width,
        height: event.payload.height,
        error: null,
      };
    case "mutation-started":
      return { ...state, busy: true, error: null };
    case "mutation-acknowledged":
      return {
        ...state,
        busy: false,
        erased: [...event.response.erased],
        currentImageUrl: event.response.image_url,
        error: null,
      };
    case "mutation-failed":
      // server rejected or died: keep the acknowledged state, surface the message
      return { ...state, busy: false, error: event.message };
  }
}

export function canMutate(state: UiState): boolean {
  return state.loaded && !state.busy;
}

export function compareEnabled(state: UiState): boolean {
  return state.erased.length > 0;
}
