/* @ts-self-types="./cmsr_web.d.ts" */

/**
 * Downsample a rendered modality, upsample it again and back-project.
 */
export class Resampling {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        ResamplingFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_resampling_free(ptr, 0);
    }
    /**
     * @returns {Uint8Array}
     */
    bicubic() {
        const ret = wasm.resampling_bicubic(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * The low-resolution input, pixel-replicated to full size.
     * @returns {Uint8Array}
     */
    lr_view() {
        const ret = wasm.resampling_lr_view(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @param {number} seed
     * @param {number} size
     * @param {number} factor
     * @param {number} ibp_iters
     */
    constructor(seed, size, factor, ibp_iters) {
        const ret = wasm.resampling_new(seed, size, factor, ibp_iters);
        this.__wbg_ptr = ret;
        ResamplingFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * @returns {number}
     */
    psnr_bicubic() {
        const ret = wasm.resampling_psnr_bicubic(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    psnr_refined() {
        const ret = wasm.resampling_psnr_refined(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Uint8Array}
     */
    refined() {
        const ret = wasm.resampling_refined(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    size() {
        const ret = wasm.resampling_size(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Mean absolute consistency error before each iteration and at the end.
     * @returns {Float64Array}
     */
    trace() {
        const ret = wasm.resampling_trace(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
}
if (Symbol.dispose) Resampling.prototype[Symbol.dispose] = Resampling.prototype.free;

/**
 * A small network trained a few iterations per call.
 */
export class Session {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        SessionFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_session_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    iterations() {
        const ret = wasm.session_iterations(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    learning_rate() {
        const ret = wasm.session_learning_rate(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Float32Array}
     */
    loss_trace() {
        const ret = wasm.session_loss_trace(this.__wbg_ptr);
        var v1 = getArrayF32FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 4, 4);
        return v1;
    }
    /**
     * 2× task on a rendered scene whose guide is shifted by `shift_px`.
     * @param {number} seed
     * @param {number} size
     * @param {number} shift_px
     */
    constructor(seed, size, shift_px) {
        const ret = wasm.session_new(seed, size, shift_px);
        this.__wbg_ptr = ret;
        SessionFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * @returns {Uint8Array}
     */
    overlay() {
        const ret = wasm.session_overlay(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * Single-pass output of the current weights.
     * @returns {Uint8Array}
     */
    preview() {
        const ret = wasm.session_preview(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    psnr() {
        const ret = wasm.session_psnr(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    psnr_bicubic() {
        const ret = wasm.session_psnr_bicubic(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    size() {
        const ret = wasm.session_size(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Runs up to `n` iterations; returns the last loss, or NaN once stopped.
     * @param {number} n
     * @returns {number}
     */
    step(n) {
        const ret = wasm.session_step(this.__wbg_ptr, n);
        return ret;
    }
    /**
     * @returns {boolean}
     */
    stopped() {
        const ret = wasm.session_stopped(this.__wbg_ptr);
        return ret !== 0;
    }
    /**
     * Learned translation in pixels, `[tx, ty]`.
     * @returns {Float32Array}
     */
    translation_px() {
        const ret = wasm.session_translation_px(this.__wbg_ptr);
        var v1 = getArrayF32FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 4, 4);
        return v1;
    }
}
if (Symbol.dispose) Session.prototype[Symbol.dispose] = Session.prototype.free;

/**
 * Hand-driven deformation of a rendered guide.
 */
export class WarpExplorer {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        WarpExplorerFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_warpexplorer_free(ptr, 0);
    }
    /**
     * Mean point displacement of the current warp, in pixels.
     * @returns {number}
     */
    mean_displacement() {
        const ret = wasm.warpexplorer_mean_displacement(this.__wbg_ptr);
        return ret;
    }
    /**
     * @param {number} seed
     * @param {number} size
     */
    constructor(seed, size) {
        const ret = wasm.warpexplorer_new(seed, size);
        this.__wbg_ptr = ret;
        WarpExplorerFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * Red from the warped guide, green from the modality.
     * @returns {Uint8Array}
     */
    overlay() {
        const ret = wasm.warpexplorer_overlay(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * Rotation in degrees, translation in pixels, isotropic scale.
     * @param {number} angle_deg
     * @param {number} tx_px
     * @param {number} ty_px
     * @param {number} scale
     */
    set_affine(angle_deg, tx_px, ty_px, scale) {
        wasm.warpexplorer_set_affine(this.__wbg_ptr, angle_deg, tx_px, ty_px, scale);
    }
    /**
     * Random CPAB coefficients of the given amplitude.
     * @param {number} amplitude
     * @param {number} seed
     */
    set_cpab(amplitude, seed) {
        wasm.warpexplorer_set_cpab(this.__wbg_ptr, amplitude, seed);
    }
    /**
     * Moves the central TPS control point by a pixel offset.
     * @param {number} dx_px
     * @param {number} dy_px
     */
    set_tps(dx_px, dy_px) {
        wasm.warpexplorer_set_tps(this.__wbg_ptr, dx_px, dy_px);
    }
    /**
     * @returns {number}
     */
    size() {
        const ret = wasm.warpexplorer_size(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {Uint8Array}
     */
    warped() {
        const ret = wasm.warpexplorer_warped(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
}
if (Symbol.dispose) WarpExplorer.prototype[Symbol.dispose] = WarpExplorer.prototype.free;
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_344f42d3211c4765: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./cmsr_web_bg.js": import0,
    };
}

const ResamplingFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_resampling_free(ptr, 1));
const SessionFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_session_free(ptr, 1));
const WarpExplorerFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_warpexplorer_free(ptr, 1));

function getArrayF32FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat32ArrayMemory0().subarray(ptr / 4, ptr / 4 + len);
}

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

let cachedFloat32ArrayMemory0 = null;
function getFloat32ArrayMemory0() {
    if (cachedFloat32ArrayMemory0 === null || cachedFloat32ArrayMemory0.byteLength === 0) {
        cachedFloat32ArrayMemory0 = new Float32Array(wasm.memory.buffer);
    }
    return cachedFloat32ArrayMemory0;
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat32ArrayMemory0 = null;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = module.ok && expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('cmsr_web_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
