/** Minimal deterministic PNG encoder for rasterized request images.
 *
 * Writes 8-bit RGB PNGs with filter 0 scanlines inside a zlib stream of
 * stored (uncompressed) deflate blocks. Any standards-compliant decoder
 * reads these; the point is determinism and zero dependencies, not
 * compression (request images are small).
 */

import { ImageBuffer } from "./raster.js";

const PNG_SIGNATURE = Uint8Array.of(137, 80, 78, 71, 13, 10, 26, 10);
const MAX_STORED_BLOCK = 65535;

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = (CRC_TABLE[(c ^ bytes[i]!) & 0xff]! ^ (c >>> 8)) >>> 0;
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]!) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function writeU32BE(out: number[], value: number): void {
  out.push((value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff);
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const head: number[] = [];
  writeU32BE(head, data.length);
  const typed = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) {
    typed[i] = type.charCodeAt(i);
  }
  typed.set(data, 4);
  const tail: number[] = [];
  writeU32BE(tail, crc32(typed));
  const out = new Uint8Array(4 + typed.length + 4);
  out.set(head, 0);
  out.set(typed, 4);
  out.set(tail, 4 + typed.length);
  return out;
}

/** Zlib stream of stored deflate blocks around the raw bytes. */
export function zlibStored(raw: Uint8Array): Uint8Array {
  const nBlocks = Math.max(1, Math.ceil(raw.length / MAX_STORED_BLOCK));
  const out = new Uint8Array(2 + nBlocks * 5 + raw.length + 4);
  out[0] = 0x78; // 32K window, deflate
  out[1] = 0x01; // no preset dictionary, fastest flavor; (CMF<<8|FLG) % 31 == 0
  let o = 2;
  for (let start = 0, block = 0; block < nBlocks; block++, start += MAX_STORED_BLOCK) {
    const len = Math.min(MAX_STORED_BLOCK, raw.length - start);
    out[o++] = block === nBlocks - 1 ? 1 : 0; // BFINAL, BTYPE=00
    out[o++] = len & 0xff;
    out[o++] = (len >>> 8) & 0xff;
    out[o++] = ~len & 0xff;
    out[o++] = (~len >>> 8) & 0xff;
    out.set(raw.subarray(start, start + len), o);
    o += len;
  }
  const adlerBytes: number[] = [];
  writeU32BE(adlerBytes, adler32(raw));
  out.set(adlerBytes, o);
  return out;
}

export function encodePng(img: ImageBuffer): Uint8Array {
  const ihdr: number[] = [];
  writeU32BE(ihdr, img.width);
  writeU32BE(ihdr, img.height);
  ihdr.push(8, 2, 0, 0, 0); // bit depth 8, RGB, deflate, adaptive filters, no interlace

  const stride = img.width * 3;
  const raw = new Uint8Array(img.height * (1 + stride));
  for (let y = 0; y < img.height; y++) {
    raw[y * (1 + stride)] = 0; // filter type None
    raw.set(img.data.subarray(y * stride, (y + 1) * stride), y * (1 + stride) + 1);
  }

  const parts = [
    PNG_SIGNATURE,
    chunk("IHDR", Uint8Array.from(ihdr)),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let o = 0;
  for (const part of parts) {
    out.set(part, o);
    o += part.length;
  }
  return out;
}

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function base64Encode(bytes: Uint8Array): string {
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const b0 = bytes[i]!;
    const b1 = i + 1 < bytes.length ? bytes[i + 1]! : 0;
    const b2 = i + 2 < bytes.length ? bytes[i + 2]! : 0;
    out += B64[b0 >> 2]! + B64[((b0 & 3) << 4) | (b1 >> 4)]!;
    out += i + 1 < bytes.length ? B64[((b1 & 15) << 2) | (b2 >> 6)]! : "=";
    out += i + 2 < bytes.length ? B64[b2 & 63]! : "=";
  }
  return out;
}
