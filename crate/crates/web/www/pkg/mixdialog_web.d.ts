/* tslint:disable */
/* eslint-disable */

/**
 * A live dialog over one of the built-in bundles.
 */
export class DemoSession {
    free(): void;
    [Symbol.dispose](): void;
    constructor(bundle_id: string);
    originalScript(): string;
    /**
     * Submits a caller line and returns the new view as JSON.
     */
    say(text: string): string;
    viewJson(): string;
}

export function pizzaScript(): string;

export function specializeScript(script: string, bindings: string): string;

export function stagingSequences(n: number, permutations: boolean): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demosession_free: (a: number, b: number) => void;
    readonly demosession_new: (a: number, b: number) => [number, number, number];
    readonly demosession_originalScript: (a: number) => [number, number];
    readonly demosession_say: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demosession_viewJson: (a: number) => [number, number];
    readonly pizzaScript: () => [number, number];
    readonly specializeScript: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly stagingSequences: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
