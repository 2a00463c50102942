/** PNG image I/O for frames (RGB) and annotation masks (grayscale labels). */

import * as fs from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** HWC float32 RGB scaled to [0, 1] */
  data: Float32Array
}

export function readRgb(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path))
  const { width, height } = png
  const data = new Float32Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    data[3 * i] = png.data[4 * i] / 255
    data[3 * i + 1] = png.data[4 * i + 1] / 255
    data[3 * i + 2] = png.data[4 * i + 2] / 255
  }
  return { width, height, data }
}

/**
 * Annotation masks are 8-bit grayscale label images: value 0 is background,
 * value k is object k. Any colored (non R==G==B) pixel is rejected.
 */
export function readLabels(path: string): { width: number; height: number; labels: Uint8Array } {
  const png = PNG.sync.read(fs.readFileSync(path))
  const { width, height } = png
  const labels = new Uint8Array(width * height)
  for (let i = 0; i < width * height; i++) {
    const r = png.data[4 * i]
    if (png.data[4 * i + 1] !== r || png.data[4 * i + 2] !== r) {
      throw new Error(`${path}: annotation must be a grayscale label image`)
    }
    labels[i] = r
  }
  return { width, height, labels }
}

export function writeGray(path: string, values: Uint8Array, width: number, height: number): void {
  const png = new PNG({ width, height, colorType: 0, inputColorType: 0, inputHasAlpha: false })
  // pngjs keeps an RGBA working buffer regardless of output color type
  for (let i = 0; i < width * height; i++) {
    png.data[4 * i] = values[i]
    png.data[4 * i + 1] = values[i]
    png.data[4 * i + 2] = values[i]
    png.data[4 * i + 3] = 255
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }))
}
