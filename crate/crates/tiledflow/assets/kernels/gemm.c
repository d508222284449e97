void gemm(inout float C[16][18], in float A[16][14], in float B[14][18], float alpha, float beta) {
  for (int i = 0; i < 16; i++)
    for (int j = 0; j < 18; j++)
      C[i][j] *= beta;
  for (int i = 0; i < 16; i++)
    for (int j = 0; j < 18; j++)
      for (int k = 0; k < 14; k++)
        C[i][j] += alpha * A[i][k] * B[k][j];
}
