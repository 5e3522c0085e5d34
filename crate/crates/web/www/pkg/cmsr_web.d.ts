/* tslint:disable */
/* eslint-disable */

/**
 * Downsample a rendered modality, upsample it again and back-project.
 */
export class Resampling {
    free(): void;
    [Symbol.dispose](): void;
    bicubic(): Uint8Array;
    /**
     * The low-resolution input, pixel-replicated to full size.
     */
    lr_view(): Uint8Array;
    constructor(seed: number, size: number, factor: number, ibp_iters: number);
    psnr_bicubic(): number;
    psnr_refined(): number;
    refined(): Uint8Array;
    size(): number;
    /**
     * Mean absolute consistency error before each iteration and at the end.
     */
    trace(): Float64Array;
}

/**
 * A small network trained a few iterations per call.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    iterations(): number;
    learning_rate(): number;
    loss_trace(): Float32Array;
    /**
     * 2× task on a rendered scene whose guide is shifted by `shift_px`.
     */
    constructor(seed: number, size: number, shift_px: number);
    overlay(): Uint8Array;
    /**
     * Single-pass output of the current weights.
     */
    preview(): Uint8Array;
    psnr(): number;
    psnr_bicubic(): number;
    size(): number;
    /**
     * Runs up to `n` iterations; returns the last loss, or NaN once stopped.
     */
    step(n: number): number;
    stopped(): boolean;
    /**
     * Learned translation in pixels, `[tx, ty]`.
     */
    translation_px(): Float32Array;
}

/**
 * Hand-driven deformation of a rendered guide.
 */
export class WarpExplorer {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Mean point displacement of the current warp, in pixels.
     */
    mean_displacement(): number;
    constructor(seed: number, size: number);
    /**
     * Red from the warped guide, green from the modality.
     */
    overlay(): Uint8Array;
    /**
     * Rotation in degrees, translation in pixels, isotropic scale.
     */
    set_affine(angle_deg: number, tx_px: number, ty_px: number, scale: number): void;
    /**
     * Random CPAB coefficients of the given amplitude.
     */
    set_cpab(amplitude: number, seed: number): void;
    /**
     * Moves the central TPS control point by a pixel offset.
     */
    set_tps(dx_px: number, dy_px: number): void;
    size(): number;
    warped(): Uint8Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_resampling_free: (a: number, b: number) => void;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly __wbg_warpexplorer_free: (a: number, b: number) => void;
    readonly resampling_bicubic: (a: number) => [number, number];
    readonly resampling_lr_view: (a: number) => [number, number];
    readonly resampling_new: (a: number, b: number, c: number, d: number) => number;
    readonly resampling_psnr_bicubic: (a: number) => number;
    readonly resampling_psnr_refined: (a: number) => number;
    readonly resampling_refined: (a: number) => [number, number];
    readonly resampling_size: (a: number) => number;
    readonly resampling_trace: (a: number) => [number, number];
    readonly session_iterations: (a: number) => number;
    readonly session_learning_rate: (a: number) => number;
    readonly session_loss_trace: (a: number) => [number, number];
    readonly session_new: (a: number, b: number, c: number) => number;
    readonly session_overlay: (a: number) => [number, number];
    readonly session_preview: (a: number) => [number, number];
    readonly session_psnr: (a: number) => number;
    readonly session_psnr_bicubic: (a: number) => number;
    readonly session_size: (a: number) => number;
    readonly session_step: (a: number, b: number) => number;
    readonly session_stopped: (a: number) => number;
    readonly session_translation_px: (a: number) => [number, number];
    readonly warpexplorer_mean_displacement: (a: number) => number;
    readonly warpexplorer_new: (a: number, b: number) => number;
    readonly warpexplorer_overlay: (a: number) => [number, number];
    readonly warpexplorer_set_affine: (a: number, b: number, c: number, d: number, e: number) => void;
    readonly warpexplorer_set_cpab: (a: number, b: number, c: number) => void;
    readonly warpexplorer_set_tps: (a: number, b: number, c: number) => void;
    readonly warpexplorer_size: (a: number) => number;
    readonly warpexplorer_warped: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
