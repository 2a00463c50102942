#!/usr/bin/env node
/** Command line wrapper: export a frame/annotation directory pair into a
 * sequence bundle consumable by the matching engine. */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { exportSequence, ResizePolicy } from './export'

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command('export', 'export frames + masks into a sequence bundle', y =>
      y
        .option('frames', { type: 'string', demandOption: true, describe: 'frame image directory' })
        .option('masks', { type: 'string', demandOption: true, describe: 'annotation directory' })
        .option('out', { type: 'string', demandOption: true, describe: 'bundle directory to write' })
        .option('resize', { choices: ['480', 'native'] as const, default: 'native' as const })
        .option('seed', { type: 'number', describe: 'backbone weight seed' }),
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      throw err ?? new Error(msg)
    })
    .parse()

  const result = exportSequence({
    framesDir: args.frames as string,
    masksDir: args.masks as string,
    outDir: args.out as string,
    resize: args.resize as ResizePolicy,
    seed: args.seed as number | undefined,
  })
  console.log(
    `exported ${result.frames} frame(s), ${result.objects} object(s) -> ` +
      `${result.featureDims.join('x')} features at ${result.outDir}`,
  )
  return 0
}

if (require.main === module) {
  main(hideBin(process.argv))
    .then(code => process.exit(code))
    .catch(err => {
      console.error(`exporter: error: ${err.message}`)
      process.exit(1)
    })
}
