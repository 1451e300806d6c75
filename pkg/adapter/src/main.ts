#!/usr/bin/env node
import process from 'node:process';
import { serve } from './server.js';

void serve({
  input: process.stdin,
  output: process.stdout,
  env: process.env,
  exit: (code) => process.exit(code),
}).catch((err) => {
  console.error('adapter terminated', err);
  process.exit(1);
});
