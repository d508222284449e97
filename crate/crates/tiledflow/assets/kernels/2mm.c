void k2mm(float tmp[11][13], in float A[11][17], in float B[17][13],
          in float C[13][19], inout float D[11][19], float alpha, float beta) {
  for (int i = 0; i < 11; i++)
    for (int j = 0; j < 13; j++) {
      tmp[i][j] = 0;
      for (int k = 0; k < 17; k++)
        tmp[i][j] += alpha * A[i][k] * B[k][j];
    }
  for (int i = 0; i < 11; i++)
    for (int j = 0; j < 19; j++) {
      D[i][j] *= beta;
      for (int k = 0; k < 13; k++)
        D[i][j] += tmp[i][k] * C[k][j];
    }
}
