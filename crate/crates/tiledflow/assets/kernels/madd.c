void madd(out float C[32][30], in float A[32][30], in float B[32][30]) {
  for (int i = 0; i < 32; i++)
    for (int j = 0; j < 30; j++)
      C[i][j] = A[i][j] + B[i][j];
}
